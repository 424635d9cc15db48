"""CSV trajectories and JSON summaries, written atomically."""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Union

import numpy as np

from .adjoint import CostateTrajectory
from .forward import ControlSignal, StateTrajectory

logger = logging.getLogger("frachk")

Trajectory = Union[StateTrajectory, CostateTrajectory, ControlSignal]


@contextmanager
def _atomic_writer(path: Path) -> Iterator[Any]:
    """Write to a temp file next to ``path`` and move it into place on success."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            yield f
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _block_columns(prefix: str, blocks: int, dim: int) -> list[str]:
    return [f"{prefix}_{i}_{c}" for i in range(blocks) for c in range(1, dim + 1)]


def trajectory_table(trajectory: Trajectory) -> tuple[list[str], np.ndarray, np.ndarray]:
    """
    Header, times and values of the rows k = 1..n of a trajectory.

    Node 0 is left out: the state is singular there.
    """
    if isinstance(trajectory, StateTrajectory):
        header = _block_columns("x", trajectory.network.blocks, trajectory.dim)
        values = trajectory.values()
    elif isinstance(trajectory, CostateTrajectory):
        blocks = trajectory.samples.shape[1] // trajectory.dim
        header = _block_columns("lambda", blocks, trajectory.dim)
        values = trajectory.samples[1:]
    elif isinstance(trajectory, ControlSignal):
        header = [f"u_{c}" for c in range(1, trajectory.dim + 1)]
        values = trajectory.samples[1:]
    else:
        raise TypeError(f"Cannot write {type(trajectory).__name__} as a trajectory CSV")
    return ["t", *header], trajectory.grid.nodes[1:], values


def emit_csv(trajectory: Trajectory, path: Union[str, Path]) -> Path:
    """
    Write a trajectory as CSV: header row, then one row per node k = 1..n.

    Floats use the shortest representation that reads back bit-exact; lines end in LF.

    Raises:
        OSError: If the file cannot be written (message includes the path)
    """
    path = Path(path)
    header, times, values = trajectory_table(trajectory)
    try:
        with _atomic_writer(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for t, row in zip(times, values):
                writer.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e.strerror or e}") from e
    logger.info(f"Wrote {len(times)} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> tuple[list[str], np.ndarray, np.ndarray]:
    """
    Read a CSV written by emit_csv.

    Returns:
        (header, times of shape (n,), values of shape (n, columns - 1))
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    table = np.array([[float(v) for v in row] for row in body], dtype=float).reshape(len(body), len(header))
    return header, table[:, 0], table[:, 1:]


def write_summary(summary: dict[str, Any], path: Union[str, Path]) -> Path:
    """Write the run summary as indented JSON."""
    path = Path(path)
    try:
        with _atomic_writer(path) as f:
            json.dump(summary, f, indent=2, ensure_ascii=False)
            f.write("\n")
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e.strerror or e}") from e
    logger.info(f"Wrote summary to {path}")
    return path
