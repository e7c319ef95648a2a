"""
Errors, pre-flight checks, failure bookkeeping and shutdown handling for
batch runs of the moisture-mapping simulator.
"""

import importlib
import logging
import os
import platform
import signal
import sys
import threading
from pathlib import Path
from typing import Any, Callable, Dict, List, NamedTuple, Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class FactorizationFailure(SimulationError):
    """The (jittered) Gram matrix could not be Cholesky-factorized."""


class OutOfBounds(SimulationError):
    """A query point lies outside the square domain [0, s]^2."""


class EmptyCandidates(SimulationError):
    """No selectable candidate location remains."""


class ConfigError(SimulationError):
    """An experiment plan or campaign configuration is invalid."""


class ShapeMismatch(SimulationError):
    """Two grids that must share a spec do not."""


class ArtifactError(SimulationError):
    """A persisted artifact could not be read, parsed or written."""

    def __init__(self, path, message: str):
        self.path = Path(path)
        super().__init__(f"{self.path}: {message}")


SUCCESS = "success"
WARNING = "warning"
CRITICAL = "critical_failure"
STATUS_SYMBOLS = {SUCCESS: "✓", WARNING: "⚠", CRITICAL: "✗"}


class CheckResult(NamedTuple):
    status: str
    message: str
    details: Optional[Dict[str, Any]] = None


class SystemValidator:
    """Pre-flight checks run before a batch writes anything."""

    MIN_PYTHON = (3, 10)
    REQUIRED_MODULES = {
        "numpy": "numpy",
        "scipy": "scipy",
        "pandas": "pandas",
        "opencv-python": "cv2",
        "pillow": "PIL",
    }

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.validation_results: Dict[str, CheckResult] = {}

    def _checks(self, output_dir: Optional[str]):
        yield "python", self.check_python
        yield "packages", self.check_packages
        if output_dir is not None:
            yield "output_dir", lambda: self.check_output_dir(output_dir)

    def validate_all(self, output_dir: Optional[str] = None) -> bool:
        """
        Run every check and keep the results in ``validation_results``.

        Args:
            output_dir: Directory the batch will write into (not checked if None)

        Returns:
            False if any check reported a critical failure
        """
        self.validation_results = {}
        for name, check in self._checks(output_dir):
            try:
                result = check()
            except Exception as e:
                result = CheckResult(CRITICAL, f"check raised {type(e).__name__}: {e}")
            self.validation_results[name] = result

            log = {SUCCESS: self.logger.info, WARNING: self.logger.warning}.get(result.status, self.logger.error)
            log(f"Validation {name}: {result.message}")

        return all(r.status != CRITICAL for r in self.validation_results.values())

    def check_python(self) -> CheckResult:
        found = platform.python_version()
        if sys.version_info < self.MIN_PYTHON:
            required = ".".join(str(v) for v in self.MIN_PYTHON)
            return CheckResult(CRITICAL, f"Python {required}+ required, found {found}")
        return CheckResult(SUCCESS, f"Python {found} on {platform.system()}")

    def check_packages(self) -> CheckResult:
        """The numerical and imaging stack imports."""
        versions: Dict[str, str] = {}
        missing: List[str] = []
        for package, module_name in self.REQUIRED_MODULES.items():
            try:
                versions[package] = getattr(importlib.import_module(module_name), "__version__", "unknown")
            except ImportError:
                missing.append(package)

        if missing:
            return CheckResult(CRITICAL, f"missing {', '.join(missing)}; run pip install -r requirements.txt",
                               {"versions": versions})
        return CheckResult(SUCCESS, ", ".join(f"{p} {v}" for p, v in versions.items()), {"versions": versions})

    def check_output_dir(self, output_dir: str) -> CheckResult:
        path = Path(output_dir)
        try:
            path.mkdir(parents=True, exist_ok=True)
            marker = path / ".write_check"
            marker.touch()
            marker.unlink()
        except OSError as e:
            return CheckResult(CRITICAL, f"{path} is not writable ({e})")
        return CheckResult(SUCCESS, f"{path.resolve()} is writable")

    def get_validation_report(self) -> str:
        lines = ["System Validation Report", "-" * 30]
        for name, result in self.validation_results.items():
            lines.append(f"{STATUS_SYMBOLS.get(result.status, '?')} {name.upper()}: {result.message}")
        return "\n".join(lines)


class CampaignFailure(NamedTuple):
    tuple_id: str
    error_type: str
    exception: str
    message: str


class ErrorHandler:
    """
    Thread-safe failure ledger for a batch.

    Every handled error is counted per type. Errors whose context carries a
    ``tuple_id`` are also recorded as campaign failures for the manifest.
    Each type maps to a recovery strategy returning True when the caller
    may retry.
    """

    def __init__(self, max_retries: int = 3):
        self.logger = logging.getLogger(__name__)
        self.max_retries = max_retries
        self.error_counts: Dict[str, int] = {}
        self.failures: List[CampaignFailure] = []
        self._lock = threading.Lock()
        self.recovery_strategies: Dict[str, Callable[[Exception, Dict[str, Any]], bool]] = {
            "campaign_error": self._recover_campaign,
            "io_error": self._recover_io,
            "general_error": lambda exception, context: False,
        }

    def handle_error(self, error_type: str, exception: Exception, context: Optional[Dict[str, Any]] = None) -> bool:
        """
        Count, log and record an error, then run its recovery strategy.

        Args:
            error_type: campaign_error, io_error or general_error
            exception: The exception that occurred
            context: ``tuple_id`` marks a campaign failure; ``path`` feeds io_error recovery

        Returns:
            True if recovery succeeded and the caller may retry
        """
        context = context or {}
        with self._lock:
            count = self.error_counts[error_type] = self.error_counts.get(error_type, 0) + 1
            if "tuple_id" in context:
                self.failures.append(CampaignFailure(
                    str(context["tuple_id"]), error_type, type(exception).__name__, str(exception)))

        where = f" [{context['tuple_id']}]" if "tuple_id" in context else ""
        self.logger.error(f"{error_type}{where}: {type(exception).__name__}: {exception}")

        if error_type != "campaign_error" and count > self.max_retries:
            self.logger.error(f"Giving up on {error_type} after {count - 1} recoveries")
            return False

        strategy = self.recovery_strategies.get(error_type, self.recovery_strategies["general_error"])
        try:
            return bool(strategy(exception, context))
        except Exception as e:
            self.logger.error(f"Recovery for {error_type} failed: {e}")
            return False

    def _recover_campaign(self, exception: Exception, context: Dict[str, Any]) -> bool:
        # campaigns are deterministic; a rerun reproduces the failure
        self.logger.warning(f"Campaign {context.get('tuple_id', '?')} marked failed")
        return False

    def _recover_io(self, exception: Exception, context: Dict[str, Any]) -> bool:
        """Recreate the directory a write needed; retry only if it is writable again."""
        if not context.get("path"):
            return False
        target = Path(context["path"])
        directory = target if target.is_dir() else target.parent
        directory.mkdir(parents=True, exist_ok=True)
        self.logger.info(f"Recreated {directory}")
        return os.access(directory, os.W_OK)

    def reset(self):
        """Forget counts and failures (start of a new batch)."""
        with self._lock:
            self.error_counts.clear()
            self.failures.clear()

    def get_error_summary(self) -> Dict[str, int]:
        with self._lock:
            return dict(self.error_counts)

    def get_failures(self) -> List[Dict[str, Any]]:
        with self._lock:
            return [failure._asdict() for failure in self.failures]


class GracefulShutdown:
    """
    Turns SIGINT/SIGTERM into a stop request.

    Processors poll is_shutdown_requested() between campaigns: in-flight
    campaigns finish, undispatched ones stay pending for the next run.
    """

    def __init__(self, install_signal_handlers: bool = True):
        self.logger = logging.getLogger(__name__)
        self._requested = threading.Event()
        self._handlers: List[Callable[[], None]] = []
        self._lock = threading.Lock()
        if install_signal_handlers:
            self._install_signal_handlers()

    def _install_signal_handlers(self):
        # signal.signal is only allowed on the main thread
        if threading.current_thread() is not threading.main_thread():
            self.logger.debug("Not on the main thread, signal handlers not installed")
            return
        for name in ("SIGINT", "SIGTERM"):
            if hasattr(signal, name):
                signal.signal(getattr(signal, name), self._on_signal)

    def _on_signal(self, signum, frame):
        self.logger.warning(f"Received signal {signum}, finishing in-flight campaigns")
        self.shutdown()

    def register_shutdown_handler(self, handler: Callable[[], None]):
        with self._lock:
            self._handlers.append(handler)

    def shutdown(self):
        """Request a stop; registered handlers run on the first request only."""
        with self._lock:
            if self._requested.is_set():
                return
            self._requested.set()
            handlers = list(self._handlers)

        for handler in handlers:
            try:
                handler()
            except Exception as e:
                self.logger.error(f"Shutdown handler {getattr(handler, '__name__', handler)} failed: {e}")
        self.logger.info("Shutdown requested, no further campaigns will start")

    def reset(self):
        """Clear a previous request and its handlers."""
        with self._lock:
            self._requested.clear()
            self._handlers = []

    def is_shutdown_requested(self) -> bool:
        return self._requested.is_set()


_system_validator: Optional[SystemValidator] = None
_error_handler: Optional[ErrorHandler] = None
_graceful_shutdown: Optional[GracefulShutdown] = None


def get_system_validator() -> SystemValidator:
    global _system_validator
    if _system_validator is None:
        _system_validator = SystemValidator()
    return _system_validator


def get_error_handler() -> ErrorHandler:
    global _error_handler
    if _error_handler is None:
        _error_handler = ErrorHandler()
    return _error_handler


def get_graceful_shutdown() -> GracefulShutdown:
    global _graceful_shutdown
    if _graceful_shutdown is None:
        _graceful_shutdown = GracefulShutdown()
    return _graceful_shutdown


def initialize_error_handling(output_dir: Optional[str] = None) -> bool:
    """
    Prepare the process-wide handlers and run the pre-flight checks.

    Prints the validation report when a critical check fails.

    Args:
        output_dir: Directory a batch run will write into

    Returns:
        True if every critical check passed
    """
    get_error_handler().reset()
    get_graceful_shutdown()
    validator = get_system_validator()

    try:
        passed = validator.validate_all(output_dir)
    except Exception as e:
        logging.getLogger(__name__).error(f"System validation crashed: {e}")
        return False

    if not passed:
        print("System validation failed. Check logs for details.")
        print(validator.get_validation_report())
    return passed
