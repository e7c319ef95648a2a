"""
Campaign processor for the batch runner.
Runs independent campaign jobs on a pool of worker threads fed from a queue.
"""

import threading
import time
import logging
from typing import Any, Callable, Dict, List, NamedTuple, Optional
from queue import Queue, Empty

import config
from .error_handler import SimulationError, get_error_handler, get_graceful_shutdown

COMPLETED = "completed"
FAILED = "failed"
PENDING = "pending"


class CampaignJob(NamedTuple):
    """One unit of work: a tuple id and the callable that runs and persists it."""
    tuple_id: str
    run: Callable[[], Any]


class CampaignProcessor:
    """
    Runs campaign jobs on ``workers`` threads.

    Jobs share nothing but read-only inputs; each writes only its own result
    directory. NumPy/SciPy release the GIL inside the linear algebra, so the
    threads overlap in the Cholesky and prediction work.
    """

    def __init__(self, workers: int = config.WORKERS):
        """
        Initialize campaign processor.

        Args:
            workers: Number of worker threads (>= 1)
        """
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}")

        self.workers = int(workers)
        self.logger = logging.getLogger(__name__)

        self.processing_queue: Queue = Queue()
        self.is_running = False
        self.worker_threads: List[threading.Thread] = []

        # called with (tuple_id, status) after each job
        self.on_processing_complete: Optional[Callable[[str, str], None]] = None

        self.statuses: Dict[str, str] = {}
        self._lock = threading.Lock()

    def start_processor(self) -> None:
        """Start the worker threads."""
        if self.is_running:
            self.logger.warning("Campaign processor already running")
            return

        self.is_running = True
        self.worker_threads = [
            threading.Thread(target=self._processing_loop, name=f"campaign-worker-{i}", daemon=True)
            for i in range(self.workers)
        ]
        for thread in self.worker_threads:
            thread.start()
        self.logger.info(f"Campaign processor started with {self.workers} workers")

    def stop_processor(self) -> None:
        """Stop the worker threads once they finish their current job."""
        self.is_running = False
        for thread in self.worker_threads:
            if thread.is_alive():
                thread.join()
        self.worker_threads = []
        self.logger.info("Campaign processor stopped")

    def submit(self, job: CampaignJob) -> None:
        """Queue a job; it is pending until a worker picks it up."""
        with self._lock:
            self.statuses[job.tuple_id] = PENDING
        self.processing_queue.put(job)

    def wait_until_done(self) -> None:
        """Block until every queued job was processed or dropped."""
        self.processing_queue.join()

    def _processing_loop(self) -> None:
        """Worker loop: take jobs until the processor stops."""
        while self.is_running:
            try:
                job = self.processing_queue.get(timeout=0.1)
            except Empty:
                continue

            try:
                if get_graceful_shutdown().is_shutdown_requested():
                    # leave it pending for the next invocation
                    continue
                self._process_single_job(job)
            finally:
                self.processing_queue.task_done()

    def _process_single_job(self, job: CampaignJob) -> str:
        """
        Run one job and record its status.

        Args:
            job: Campaign job to run

        Returns:
            The job's final status
        """
        start_time = time.time()
        try:
            self._run_job(job)
            status = COMPLETED
            self.logger.info(f"Campaign {job.tuple_id} completed in {time.time() - start_time:.2f} seconds")
        except (SimulationError, ValueError, OSError) as e:
            status = FAILED
            get_error_handler().handle_error("campaign_error", e, {"tuple_id": job.tuple_id})
        except Exception as e:
            status = FAILED
            get_error_handler().handle_error("general_error", e, {"tuple_id": job.tuple_id})

        with self._lock:
            self.statuses[job.tuple_id] = status

        if self.on_processing_complete:
            self.on_processing_complete(job.tuple_id, status)
        return status

    def _run_job(self, job: CampaignJob) -> None:
        """Run a job, retrying once if its output directory could be recreated."""
        try:
            job.run()
        except OSError as e:
            if not get_error_handler().handle_error("io_error", e, {"path": e.filename}):
                raise
            self.logger.info(f"Retrying campaign {job.tuple_id} after I/O recovery")
            job.run()

    def run_all(self, jobs: List[CampaignJob]) -> Dict[str, str]:
        """
        Run jobs to completion (or until shutdown) and return their statuses.

        Returns:
            Mapping tuple_id -> completed | failed | pending
        """
        for job in jobs:
            self.submit(job)
        self.start_processor()
        try:
            self.wait_until_done()
        finally:
            self.stop_processor()
        return self.get_statuses()

    def get_statuses(self) -> Dict[str, str]:
        with self._lock:
            return dict(self.statuses)


class SimpleCampaignProcessor(CampaignProcessor):
    """
    Sequential processor running jobs in the calling thread.
    For use when threading is not desired or needed.
    """

    def __init__(self):
        super().__init__(workers=1)

    def run_all(self, jobs: List[CampaignJob]) -> Dict[str, str]:
        for job in jobs:
            with self._lock:
                self.statuses[job.tuple_id] = PENDING
        for job in jobs:
            if get_graceful_shutdown().is_shutdown_requested():
                self.logger.info("Shutdown requested, leaving remaining campaigns pending")
                break
            self._process_single_job(job)
        return self.get_statuses()


# Factory function
def create_campaign_processor(workers: int = config.WORKERS) -> CampaignProcessor:
    """
    Factory function to create a campaign processor.

    Args:
        workers: Worker thread count; 1 selects the sequential processor

    Returns:
        Configured campaign processor
    """
    if workers > 1:
        return CampaignProcessor(workers)
    return SimpleCampaignProcessor()
