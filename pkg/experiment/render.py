"""PNG rendering of snapshot grids."""

from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from PIL import Image

from analysis.clusters import Snapshot


UP_COLOR: Tuple[int, int, int] = (253, 231, 37)
DOWN_COLOR: Tuple[int, int, int] = (59, 82, 139)


def snapshot_image(snap: Snapshot, cell: int = 16) -> Image.Image:
    """
    Image of one snapshot, one square cell per site.

    Args:
        snap: Snapshot to draw
        cell: Cell edge in pixels

    Returns:
        RGB image of size (cols * cell, rows * cell)
    """
    grid = snap.grid()
    frame = np.empty(grid.shape + (3,), dtype=np.uint8)
    frame[grid] = UP_COLOR
    frame[~grid] = DOWN_COLOR
    img = Image.fromarray(frame)
    return img.resize((grid.shape[1] * cell, grid.shape[0] * cell), Image.Resampling.NEAREST)


def render_snapshots(shots: Sequence[Snapshot], directory: str, prefix: str,
                     limit: int, cell: int = 16) -> List[str]:
    """Write the first `limit` shots as PNG files; returns their paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, snap in enumerate(shots[:max(limit, 0)]):
        path = out / f"{prefix}_shot{k:04d}.png"
        snapshot_image(snap, cell).save(path, format="PNG")
        paths.append(str(path))
    return paths
