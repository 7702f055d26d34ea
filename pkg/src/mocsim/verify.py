"""Trajectory verification: endpoint matching, DTW, pass rates, and plots.

Two comparison methods are exposed.  Endpoint matching checks only where
each axis finished; DTW aligns the whole trajectories with dynamic time
warping under an L1 point cost, so a candidate can pass while running at a
different speed but fail if it takes a different path.  The DTW score is
normalized by warp-path length before comparing against the tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .engine import TrajectoryLog
from .errors import DimensionMismatch, EmptyInput, EmptyLog, EmptySeries, IoFailure

DEFAULT_TOLERANCE = 1e-3

# Fixed hash salt keeps matplotlib's generated SVG ids stable across runs.
_SVG_SALT = "mocsim"


class Method(Enum):
    ENDPOINTS = "EndPoints"
    DTW = "DTW"


@dataclass
class ComparisonReport:
    method: Method
    passed: bool
    tolerance: float
    per_axis_deltas: dict[int, float] = field(default_factory=dict)
    dtw_distance: float | None = None
    missing_axes: tuple[int, ...] = ()


def _axis_series(log: TrajectoryLog, axis_ids) -> np.ndarray:
    return log.positions_matrix(list(axis_ids))


def match_endpoints(canonical: TrajectoryLog, candidate: TrajectoryLog,
                    tolerance: float = DEFAULT_TOLERANCE) -> ComparisonReport:
    """Compare final positions axis by axis.

    Axes are taken from the canonical log; an axis missing from the
    candidate scores an infinite delta and fails the comparison.
    """
    if canonical.is_empty() or candidate.is_empty():
        raise EmptyLog("endpoint comparison needs non-empty logs")
    cand_axes = set(candidate.axis_ids())
    cand_final = candidate.final_positions()
    canon_final = canonical.final_positions()
    deltas: dict[int, float] = {}
    missing = []
    for axis in canonical.axis_ids():
        if axis not in cand_axes:
            deltas[axis] = math.inf
            missing.append(axis)
        else:
            deltas[axis] = abs(canon_final[axis] - cand_final[axis])
    passed = all(d <= tolerance for d in deltas.values())
    return ComparisonReport(method=Method.ENDPOINTS, passed=passed,
                            tolerance=tolerance, per_axis_deltas=deltas,
                            missing_axes=tuple(missing))


def _as_points(series) -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"series must be 1-D or 2-D, got shape {arr.shape}")
    if len(arr) == 0:
        raise EmptySeries("cannot warp an empty series")
    return arr


def dtw_distance(a, b) -> tuple[float, list[tuple[int, int]]]:
    """Dynamic time warping distance and one optimal warp path.

    Point cost is the L1 distance across axes.  The DP fills the classic
    cumulative matrix; for speed the sweep runs along anti-diagonals, which
    are strided views of the matrix buffer, so the whole thing stays in
    numpy.  The traceback prefers diagonal, then the ``i-1`` step, then the
    ``j-1`` step when costs tie, which pins down one deterministic path.
    """
    pa = _as_points(a)
    pb = _as_points(b)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionMismatch(
            f"series have {pa.shape[1]} and {pb.shape[1]} axes")
    n, m = len(pa), len(pb)

    if pa.shape[1] == 1:
        cost = np.abs(pa - pb.T)
    else:
        cost = np.empty((n, m))
        for i in range(n):
            cost[i] = np.abs(pb - pa[i]).sum(axis=1)

    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    flat = acc.ravel()
    cflat = cost.ravel()
    for k in range(2, n + m + 1):
        i0 = max(1, k - m)
        i1 = min(n, k - 1)
        if i0 > i1:
            continue
        length = i1 - i0 + 1
        # flat index of acc[i, k-i] is i*m + k; neighbors sit one diagonal back.
        cur = flat[k + i0 * m::m][:length]
        diag = flat[k + i0 * m - m - 2::m][:length]
        up = flat[k + i0 * m - m - 1::m][:length]
        left = flat[k + i0 * m - 1::m][:length]
        c = cflat[(i0 - 1) * m + (k - i0 - 1)::m - 1][:length] if m > 1 else \
            cflat[(i0 - 1):(i1 - 1) + 1]
        best = np.minimum(diag, up)
        np.minimum(best, left, out=best)
        cur[:] = c + best

    path = []
    i, j = n, m
    while True:
        path.append((i - 1, j - 1))
        if i == 1 and j == 1:
            break
        if i == 1:
            j -= 1
            continue
        if j == 1:
            i -= 1
            continue
        d = acc[i - 1, j - 1]
        u = acc[i - 1, j]
        l = acc[i, j - 1]
        best = min(d, u, l)
        if d == best:
            i -= 1
            j -= 1
        elif u == best:
            i -= 1
        else:
            j -= 1
    path.reverse()
    return float(acc[n, m]), path


def dtw_pass(canonical: TrajectoryLog, candidate: TrajectoryLog,
             tolerance: float = DEFAULT_TOLERANCE) -> ComparisonReport:
    """DTW comparison over the canonical log's axes, plus endpoint gating.

    Passing requires the path-length-normalized DTW distance and every
    endpoint delta to stay within the same tolerance.
    """
    endpoints = match_endpoints(canonical, candidate, tolerance)
    if endpoints.missing_axes:
        return ComparisonReport(method=Method.DTW, passed=False,
                                tolerance=tolerance,
                                per_axis_deltas=endpoints.per_axis_deltas,
                                dtw_distance=None,
                                missing_axes=endpoints.missing_axes)
    axis_ids = canonical.axis_ids()
    distance, path = dtw_distance(_axis_series(canonical, axis_ids),
                                  _axis_series(candidate, axis_ids))
    normalized = distance / len(path)
    passed = normalized <= tolerance and endpoints.passed
    return ComparisonReport(method=Method.DTW, passed=passed,
                            tolerance=tolerance,
                            per_axis_deltas=endpoints.per_axis_deltas,
                            dtw_distance=normalized)


def ftpr_from_counts(n_passed: int, n_total: int) -> float:
    """First-try pass rate in percent, rounded to 2 decimals."""
    if n_total <= 0:
        raise EmptyInput("pass rate over zero tasks is undefined")
    return round(100.0 * n_passed / n_total, 2)


def ftpr(outcomes, method: Method) -> float:
    """First-try pass rate over task outcomes for one comparison method."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EmptyInput("pass rate over zero tasks is undefined")
    passed = sum(1 for o in outcomes if o.first_attempt_passed.get(method.value, False))
    return ftpr_from_counts(passed, len(outcomes))


def emit_plots(log: TrajectoryLog, out_dir) -> list[Path]:
    """Render the log to SVG files in ``out_dir`` and return their paths.

    Per axis: position against time.  For each consecutive pair of logged
    axes: the XY path.  With three or more axes: one 3-D path in orthographic
    isometric projection.  Each logged I/O bit gets a step plot.  Rendering
    is pinned (fixed hash salt, no timestamps) so repeated calls produce
    byte-identical files.
    """
    if log.is_empty():
        raise EmptyLog("cannot plot an empty log")
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create plot directory {out_dir}: {e}") from e

    t = log.column("t_ms") / 1000.0
    axis_ids = log.axis_ids()
    written: list[Path] = []

    def save(fig, name: str) -> None:
        path = out_dir / name
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise IoFailure(f"cannot write plot {path}: {e}") from e
        finally:
            plt.close(fig)
        written.append(path)

    with matplotlib.rc_context({"svg.hashsalt": _SVG_SALT}):
        for axis in axis_ids:
            fig, ax = plt.subplots(figsize=(6.0, 4.0))
            ax.plot(t, log.column(f"ax{axis}_pos"), lw=1.2)
            ax.set_xlabel("time [s]")
            ax.set_ylabel(f"axis {axis} position")
            ax.grid(True, alpha=0.3)
            fig.tight_layout()
            save(fig, f"axis{axis}_pos.svg")

        for a, b in zip(axis_ids, axis_ids[1:]):
            fig, ax = plt.subplots(figsize=(5.0, 5.0))
            ax.plot(log.column(f"ax{a}_pos"), log.column(f"ax{b}_pos"), lw=1.2)
            ax.set_xlabel(f"axis {a}")
            ax.set_ylabel(f"axis {b}")
            ax.set_aspect("equal", adjustable="datalim")
            ax.grid(True, alpha=0.3)
            fig.tight_layout()
            save(fig, f"path_ax{a}_ax{b}.svg")

        if len(axis_ids) >= 3:
            a, b, c = axis_ids[:3]
            fig = plt.figure(figsize=(6.0, 6.0))
            ax = fig.add_subplot(projection="3d", proj_type="ortho")
            ax.plot(log.column(f"ax{a}_pos"), log.column(f"ax{b}_pos"),
                    log.column(f"ax{c}_pos"), lw=1.2)
            ax.set_xlabel(f"axis {a}")
            ax.set_ylabel(f"axis {b}")
            ax.set_zlabel(f"axis {c}")
            ax.view_init(elev=35.264, azim=-45)
            save(fig, f"path3d_ax{a}_ax{b}_ax{c}.svg")

        for bit in log.input_bit_ids():
            fig, ax = plt.subplots(figsize=(6.0, 2.2))
            ax.step(t, log.column(f"in{bit}"), where="post", lw=1.2)
            ax.set_xlabel("time [s]")
            ax.set_ylabel(f"in {bit}")
            ax.set_ylim(-0.15, 1.15)
            fig.tight_layout()
            save(fig, f"in{bit}.svg")

        for bit in log.output_bit_ids():
            fig, ax = plt.subplots(figsize=(6.0, 2.2))
            ax.step(t, log.column(f"out{bit}"), where="post", lw=1.2)
            ax.set_xlabel("time [s]")
            ax.set_ylabel(f"out {bit}")
            ax.set_ylim(-0.15, 1.15)
            fig.tight_layout()
            save(fig, f"out{bit}.svg")

    return written
