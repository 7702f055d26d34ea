"""Verification metric tests.

The DTW oracle literally enumerates every monotone warping path for a given
shape and takes the cheapest, with no recurrence shared with the production
DP.  Path enumeration is done once per shape and the cost evaluation is
vectorized, which keeps exhaustive small-alphabet sweeps fast.
"""
import itertools
from dataclasses import dataclass, field

import numpy as np
import pytest

from mocsim import (
    DeviceConfig,
    Method,
    ProfileSpec,
    TrajectoryLog,
    create_device,
    dtw_distance,
    dtw_pass,
    emit_plots,
    ftpr,
    ftpr_from_counts,
    match_endpoints,
)
from mocsim.errors import DimensionMismatch, EmptyInput, EmptyLog, EmptySeries

TOL = 1e-3


def make_log(columns, rows):
    return TrajectoryLog(columns=list(columns), rows=[list(r) for r in rows])


def ramp_log(final, n=20, axis=1):
    rows = [[t + 1, final * (t + 1) / n, 0.0] for t in range(n)]
    return make_log(["t_ms", f"ax{axis}_pos", f"ax{axis}_vel"], rows)


# --- warp-path oracle ---------------------------------------------------------


def all_warp_paths(n, m):
    """Every monotone path from (0,0) to (n-1,m-1)."""
    paths = []

    def walk(i, j, acc):
        acc = acc + [(i, j)]
        if i == n - 1 and j == m - 1:
            paths.append(acc)
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, [])
    return paths


class PathTable:
    """Padded index arrays for all paths of one shape, built once."""

    def __init__(self, n, m):
        paths = all_warp_paths(n, m)
        width = max(len(p) for p in paths)
        self.ai = np.zeros((len(paths), width), dtype=np.int64)
        self.bj = np.zeros((len(paths), width), dtype=np.int64)
        self.mask = np.zeros((len(paths), width), dtype=bool)
        for r, p in enumerate(paths):
            for c, (i, j) in enumerate(p):
                self.ai[r, c] = i
                self.bj[r, c] = j
                self.mask[r, c] = True

    def min_cost(self, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        costs = np.abs(a[self.ai] - b[self.bj]) * self.mask
        return float(costs.sum(axis=1).min())


_tables = {}


def oracle(a, b):
    shape = (len(a), len(b))
    if shape not in _tables:
        _tables[shape] = PathTable(*shape)
    return _tables[shape].min_cost(a, b)


def test_dtw_matches_exhaustive_oracle():
    """Exact agreement for every length pair up to 7 over values {0,1,2}.

    Shapes small enough to sweep completely are swept; the rest get a
    seeded batch of random draws from the same alphabet.
    """
    rng = np.random.default_rng(2024)
    for n in range(1, 8):
        for m in range(1, 8):
            if 3 ** (n + m) <= 2187:
                pairs = ((list(a), list(b))
                         for a in itertools.product((0, 1, 2), repeat=n)
                         for b in itertools.product((0, 1, 2), repeat=m))
            else:
                pairs = ((rng.integers(0, 3, size=n).tolist(),
                          rng.integers(0, 3, size=m).tolist())
                         for _ in range(60))
            for a, b in pairs:
                got, _ = dtw_distance(a, b)
                assert got == oracle(a, b), (a, b)


def test_dtw_oracle_on_real_valued_series():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = rng.uniform(-5, 5, size=rng.integers(1, 7))
        b = rng.uniform(-5, 5, size=rng.integers(1, 7))
        got, _ = dtw_distance(a, b)
        assert got == pytest.approx(oracle(a, b), abs=1e-12)


def test_dtw_frozen_examples():
    d, path = dtw_distance([0, 1, 2], [0, 2])
    assert d == 1.0
    d, _ = dtw_distance([5], [5, 5, 5])
    assert d == 0.0


def test_dtw_identity_is_diagonal():
    a = [[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]
    d, path = dtw_distance(a, a)
    assert d == 0.0
    assert path == [(0, 0), (1, 1), (2, 2)]


def test_dtw_tie_break_prefers_diagonal():
    d, path = dtw_distance([0, 0], [0, 0])
    assert d == 0.0
    assert path == [(0, 0), (1, 1)]
    _, path = dtw_distance([0, 0], [0])
    assert path == [(0, 0), (1, 0)]
    _, path = dtw_distance([0], [0, 0])
    assert path == [(0, 0), (0, 1)]


def test_dtw_symmetry():
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = rng.uniform(-5, 5, size=rng.integers(1, 10))
        b = rng.uniform(-5, 5, size=rng.integers(1, 10))
        ab, _ = dtw_distance(a, b)
        ba, _ = dtw_distance(b, a)
        assert ab == pytest.approx(ba, abs=1e-12)


def test_dtw_zero_iff_zero_cost_alignment():
    rng = np.random.default_rng(13)
    for _ in range(200):
        a = rng.integers(0, 3, size=rng.integers(1, 7)).tolist()
        b = rng.integers(0, 3, size=rng.integers(1, 7)).tolist()
        d, path = dtw_distance(a, b)
        matched = [abs(a[i] - b[j]) for i, j in path]
        if d == 0.0:
            assert all(c == 0 for c in matched)
        else:
            assert d > 0.0


def test_dtw_multidim_series():
    a = [[0, 0], [1, 1], [2, 2]]
    b = [[0, 0], [2, 2]]
    d, _ = dtw_distance(a, b)
    # middle point (1,1) maps to its nearest neighbor: L1 cost 2
    assert d == 2.0


def test_dtw_input_guards():
    with pytest.raises(EmptySeries):
        dtw_distance([], [1, 2])
    with pytest.raises(DimensionMismatch):
        dtw_distance([[1, 2]], [[1, 2, 3]])


# --- endpoint matching ----------------------------------------------------------


def test_identical_logs_pass():
    log = ramp_log(130.2)
    report = match_endpoints(log, log, TOL)
    assert report.passed
    assert report.per_axis_deltas == {1: 0.0}
    assert report.missing_axes == ()


def test_endpoint_delta_reported():
    report = match_endpoints(ramp_log(130.2), ramp_log(130.0), TOL)
    assert not report.passed
    assert report.per_axis_deltas[1] == pytest.approx(0.2, abs=1e-12)


def test_endpoint_boundary_inclusive():
    assert match_endpoints(ramp_log(10.0), ramp_log(10.0 + TOL), TOL).passed
    assert not match_endpoints(ramp_log(10.0), ramp_log(10.0 + 2 * TOL), TOL).passed


def test_endpoint_missing_axis_fails_with_infinite_delta():
    canon = make_log(["t_ms", "ax1_pos", "ax1_vel", "ax2_pos", "ax2_vel"],
                     [[1, 5.0, 0.0, 7.0, 0.0]])
    cand = make_log(["t_ms", "ax1_pos", "ax1_vel"], [[1, 5.0, 0.0]])
    report = match_endpoints(canon, cand, TOL)
    assert not report.passed
    assert report.missing_axes == (2,)
    assert report.per_axis_deltas[2] == float("inf")


def test_endpoint_empty_log_rejected():
    empty = make_log(["t_ms", "ax1_pos", "ax1_vel"], [])
    with pytest.raises(EmptyLog):
        match_endpoints(empty, ramp_log(1.0), TOL)


def test_endpoints_ignore_intermediate_path():
    detour = ramp_log(10.0)
    for row in detour.rows[5:10]:
        row[1] += 50.0
    assert match_endpoints(ramp_log(10.0), detour, TOL).passed


# --- DTW pass ---------------------------------------------------------------------


def test_dtw_pass_identical():
    log = ramp_log(42.0)
    report = dtw_pass(log, log, TOL)
    assert report.passed
    assert report.dtw_distance == 0.0


def test_dtw_pass_half_speed():
    log = ramp_log(42.0)
    slow = make_log(log.columns, [r for r in log.rows for _ in (0, 1)])
    report = dtw_pass(log, slow, TOL)
    assert report.passed
    assert report.dtw_distance == 0.0


def test_dtw_pass_uniform_offset_fails():
    log = ramp_log(10.0)
    shifted = ramp_log(10.0)
    for row in shifted.rows:
        row[1] += 10 * TOL
    report = dtw_pass(log, shifted, TOL)
    assert not report.passed
    # every cost cell is at least the offset, so normalization cannot hide it
    assert report.dtw_distance == pytest.approx(10 * TOL, rel=1e-9)


def test_dtw_stricter_than_endpoints():
    detour = ramp_log(10.0, n=40)
    for row in detour.rows[10:30]:
        row[1] += 5.0
    assert match_endpoints(ramp_log(10.0, n=40), detour, TOL).passed
    assert not dtw_pass(ramp_log(10.0, n=40), detour, TOL).passed


def test_dtw_pass_missing_axis_short_circuits():
    canon = make_log(["t_ms", "ax1_pos", "ax1_vel", "ax2_pos", "ax2_vel"],
                     [[1, 5.0, 0.0, 7.0, 0.0]])
    cand = make_log(["t_ms", "ax1_pos", "ax1_vel"], [[1, 5.0, 0.0]])
    report = dtw_pass(canon, cand, TOL)
    assert not report.passed
    assert report.dtw_distance is None
    assert report.missing_axes == (2,)


# --- pass rates --------------------------------------------------------------------


@pytest.mark.parametrize("passed,total,want", [
    (154, 186, 82.80),
    (68, 84, 80.95),
    (45, 56, 80.36),
    (41, 46, 89.13),
    (0, 30, 0.00),
    (30, 30, 100.00),
])
def test_ftpr_from_counts(passed, total, want):
    assert ftpr_from_counts(passed, total) == want


def test_ftpr_requires_tasks():
    with pytest.raises(EmptyInput):
        ftpr_from_counts(0, 0)
    with pytest.raises(EmptyInput):
        ftpr([], Method.ENDPOINTS)


@dataclass
class _Outcome:
    first_attempt_passed: dict = field(default_factory=dict)


def test_ftpr_over_outcomes():
    outcomes = [_Outcome({"EndPoints": True, "DTW": True}),
                _Outcome({"EndPoints": True, "DTW": False}),
                _Outcome({"EndPoints": False})]
    assert ftpr(outcomes, Method.ENDPOINTS) == 66.67
    assert ftpr(outcomes, Method.DTW) == 33.33


def test_ftpr_monotone_under_failures():
    rng = np.random.default_rng(5)
    for _ in range(200):
        total = int(rng.integers(1, 300))
        passed = int(rng.integers(0, total + 1))
        rate = ftpr_from_counts(passed, total)
        assert 0.0 <= rate <= 100.0
        assert ftpr_from_counts(passed, total + 1) <= rate


# --- plots -------------------------------------------------------------------------


def circular_log():
    eng = create_device(DeviceConfig(axes=(1, 2), input_bits=1, output_bits=1))
    eng.start_communication()
    eng.start_pos(1, 30.0, ProfileSpec(velocity=500.0, acceleration=5000.0))
    eng.wait(1)
    eng.start_log(axes=[1, 2], input_bits=[0], output_bits=[0])
    from mocsim import PathSegment
    eng.start_path(PathSegment.circular((1, 2), (0.0, 0.0), 360.0,
                                        ProfileSpec(velocity=100.0, acceleration=1000.0)))
    eng.wait(1)
    return eng.stop_log()


def test_plot_names_single_axis(tmp_path):
    log = ramp_log(5.0)
    written = emit_plots(log, tmp_path / "plots")
    assert [p.name for p in written] == ["axis1_pos.svg"]


def test_plot_set_for_multi_axis_log(tmp_path):
    log = circular_log()
    written = emit_plots(log, tmp_path / "plots")
    assert [p.name for p in written] == ["axis1_pos.svg", "axis2_pos.svg",
                                         "path_ax1_ax2.svg", "in0.svg", "out0.svg"]


def test_three_axis_log_gets_3d_plot(tmp_path):
    log = make_log(
        ["t_ms", "ax1_pos", "ax1_vel", "ax2_pos", "ax2_vel", "ax3_pos", "ax3_vel"],
        [[t + 1, float(t), 0.0, float(t * 2), 0.0, float(t * 3), 0.0] for t in range(5)])
    names = [p.name for p in emit_plots(log, tmp_path / "plots")]
    assert "path3d_ax1_ax2_ax3.svg" in names
    assert names.count("path3d_ax1_ax2_ax3.svg") == 1


def test_plots_are_byte_deterministic(tmp_path):
    log = circular_log()
    first = emit_plots(log, tmp_path / "a")
    second = emit_plots(log, tmp_path / "b")
    assert [p.name for p in first] == [p.name for p in second]
    for pa, pb in zip(first, second):
        assert pa.read_bytes() == pb.read_bytes(), pa.name


def test_circular_plot_data_satisfies_arc_equation(tmp_path):
    log = circular_log()
    emit_plots(log, tmp_path / "plots")
    x = log.column("ax1_pos")
    y = log.column("ax2_pos")
    radii = np.hypot(x, y)
    assert np.max(np.abs(radii - 30.0)) <= 1e-6 * 30.0


def test_plot_empty_log_rejected(tmp_path):
    empty = make_log(["t_ms", "ax1_pos", "ax1_vel"], [])
    with pytest.raises(EmptyLog):
        emit_plots(empty, tmp_path / "plots")
