"""
Heatmap rendering for fields and campaign grids.

Values are mapped on a fixed [0, 1] scale so images of different maps are
comparable. Grayscale goes to binary PGM through Pillow; the colored twin
goes to PPM through OpenCV's viridis colormap. Row 0 of a grid is y=0, so
images are flipped vertically to put the origin at the bottom-left.
"""

import logging
from pathlib import Path
from typing import List, Union

import cv2
import numpy as np
from PIL import Image

from .fields import GroundTruthField
from .storage import CAMPAIGN_FILE, load_field, read_grid_csv, read_json
from .error_handler import ArtifactError

PathLike = Union[str, Path]


def grid_to_image(grid: np.ndarray, upper: float = 1.0) -> np.ndarray:
    """
    Convert a grid to an 8-bit image array.

    Args:
        grid: 2-D array, row 0 = y=0
        upper: Value mapped to white (variance grids use sigma^2)

    Returns:
        uint8 array, flipped so the top row is y=s
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    scaled = np.clip(grid / upper, 0.0, 1.0)
    return np.flipud(np.round(scaled * 255.0).astype(np.uint8))


def write_pgm(path: PathLike, grid: np.ndarray, upper: float = 1.0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid_to_image(grid, upper)).save(path)
    return path


def write_ppm(path: PathLike, grid: np.ndarray, upper: float = 1.0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    colored = cv2.applyColorMap(grid_to_image(grid, upper), cv2.COLORMAP_VIRIDIS)
    if not cv2.imwrite(str(path), colored):
        raise ArtifactError(path, "OpenCV could not write image")
    return path


def write_heatmap(stem: PathLike, grid: np.ndarray, upper: float = 1.0) -> List[Path]:
    """Write ``<stem>.pgm`` and ``<stem>.ppm``."""
    stem = Path(stem)
    return [write_pgm(stem.parent / f"{stem.name}.pgm", grid, upper),
            write_ppm(stem.parent / f"{stem.name}.ppm", grid, upper)]


def render_field(header_path: PathLike, out_dir: PathLike) -> List[Path]:
    field = load_field(header_path)
    return write_heatmap(Path(out_dir) / Path(header_path).stem, field.values)


def render_result(result, truth: GroundTruthField, out_dir: PathLike) -> List[Path]:
    """Truth, mean and variance heatmaps of an in-memory campaign result."""
    out_dir = Path(out_dir)
    return (write_heatmap(out_dir / "truth", truth.values)
            + write_heatmap(out_dir / "mean", result.final_reconstruction)
            + write_heatmap(out_dir / "variance", result.final_variance_grid,
                            upper=result.hyperparams.signal_variance))


def render_campaign(campaign_dir: PathLike, out_dir: PathLike) -> List[Path]:
    """Truth, mean and variance heatmaps of a persisted campaign."""
    campaign_dir = Path(campaign_dir)
    out_dir = Path(out_dir)
    record = read_json(campaign_dir / CAMPAIGN_FILE)
    signal_variance = record["hyperparams"]["signal_variance"]

    written = []
    field_path = record.get("metadata", {}).get("field_path")
    if field_path:
        # stored relative to campaign.json
        resolved = (campaign_dir / field_path).resolve()
        written += write_heatmap(out_dir / "truth", load_field(resolved).values)
    written += write_heatmap(out_dir / "mean", read_grid_csv(campaign_dir / "mean.csv"))
    written += write_heatmap(out_dir / "variance", read_grid_csv(campaign_dir / "variance.csv"),
                             upper=signal_variance)
    return written


def render_heatmaps(input_path: PathLike, out_dir: PathLike = None) -> List[Path]:
    """
    Render a field JSON header or a campaign directory.

    Args:
        input_path: ``fields/<map-id>.json`` or ``results/<tuple-id>/``
        out_dir: Destination (defaults to the input's own directory)

    Raises:
        ArtifactError: If the input is neither
    """
    logger = logging.getLogger(__name__)
    input_path = Path(input_path)

    if input_path.is_dir() and (input_path / CAMPAIGN_FILE).is_file():
        written = render_campaign(input_path, out_dir or input_path)
    elif input_path.is_file() and input_path.suffix == ".json":
        written = render_field(input_path, out_dir or input_path.parent)
    else:
        raise ArtifactError(input_path, "expected a field .json header or a campaign directory")

    logger.info(f"Rendered {len(written)} images from {input_path}")
    return written
