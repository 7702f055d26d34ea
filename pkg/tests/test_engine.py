"""Engine semantics: lifecycle, tick ordering, events, logging.

Where a test needs "the tick a condition becomes true", the expected tick is
recomputed from the profile planner's sample grid rather than read back from
the engine, so the two can disagree and fail the test.
"""
import numpy as np
import pytest

from mocsim import (
    DeviceConfig,
    DistanceToTarget,
    EventBinding,
    InputEdge,
    PathSegment,
    PositionReached,
    ProfileSpec,
    SetOutputAction,
    StartPosAction,
    create_device,
)
from mocsim.errors import (
    AlreadyLogging,
    AxisBusy,
    DimensionMismatch,
    DuplicateEvent,
    EventAlreadyLatched,
    InvalidConfig,
    NotLogging,
    TimeoutExceeded,
    UnknownAxis,
    UnknownBit,
    UnknownEvent,
    WrongPhase,
)
from mocsim.profiles import plan_profile

SPEC_11S = ProfileSpec(velocity=10.0, acceleration=10.0)


def communicating(axes=(1, 2, 3), input_bits=16, output_bits=16):
    eng = create_device(DeviceConfig(axes=tuple(axes), input_bits=input_bits,
                                     output_bits=output_bits))
    eng.start_communication()
    return eng


# --- config and lifecycle -----------------------------------------------------


def test_new_device_is_blank():
    eng = create_device(DeviceConfig(axes=(1, 2, 3)))
    assert eng.phase.value == "Created"
    assert eng.time_ms == 0
    snap = eng.snapshot()
    assert snap.positions == {1: 0.0, 2: 0.0, 3: 0.0}
    assert snap.velocities == {1: 0.0, 2: 0.0, 3: 0.0}
    assert all(v == 0 for v in snap.inputs)
    assert all(v == 0 for v in snap.outputs)


@pytest.mark.parametrize("config", [
    DeviceConfig(axes=tuple(range(129))),
    DeviceConfig(axes=()),
    DeviceConfig(axes=(1, 1, 2)),
    DeviceConfig(axes=(1, -4)),
    DeviceConfig(axes=(1,), input_bits=257),
    DeviceConfig(axes=(1,), output_bits=-1),
])
def test_bad_configs_rejected(config):
    with pytest.raises(InvalidConfig):
        create_device(config)


def test_128_axes_allowed():
    eng = create_device(DeviceConfig(axes=tuple(range(128)), input_bits=256,
                                     output_bits=256))
    assert len(eng.snapshot().positions) == 128


def test_motion_requires_communicating_phase():
    eng = create_device(DeviceConfig(axes=(1,)))
    with pytest.raises(WrongPhase):
        eng.start_pos(1, 10.0, SPEC_11S)
    with pytest.raises(WrongPhase):
        eng.tick()
    eng.start_communication()
    with pytest.raises(WrongPhase):
        eng.start_communication()


def test_close_is_idempotent_and_warns_mid_move():
    eng = communicating()
    eng.start_pos(1, 100.0, SPEC_11S)
    eng.sleep_ticks(5)
    result = eng.close_device()
    assert result.outcome.success
    assert any("axis 1" in w and "still moving" in w for w in result.warnings)
    again = eng.close_device()
    assert again is result


def test_clean_close_has_no_warnings():
    eng = communicating()
    eng.start_pos(1, 1.0, SPEC_11S)
    eng.wait(1)
    result = eng.close_device()
    assert result.outcome.success
    assert result.warnings == []


# --- point-to-point motion ----------------------------------------------------


def test_example_move_reaches_exact_target():
    eng = communicating()
    eng.start_log(axes=[1])
    eng.start_pos(1, 130.2, ProfileSpec(velocity=1060.0, acceleration=11000.0))
    eng.wait(1)
    log = eng.stop_log()
    assert log.rows[-1][log.column_index("ax1_pos")] == 130.2
    assert log.rows[-1][log.column_index("ax1_vel")] == 0.0


def test_wait_on_idle_axis_is_free():
    eng = communicating()
    assert eng.wait(1) == 0
    assert eng.time_ms == 0


def test_trapezoid_11s_consumes_11000_ticks():
    eng = communicating()
    eng.start_pos(1, 100.0, SPEC_11S)
    assert eng.wait(1) == 11000
    assert eng.axis_position(1) == 100.0
    assert not eng.axis_busy(1)


def test_zero_distance_move_occupies_one_tick():
    eng = communicating()
    eng.start_pos(1, 0.0, SPEC_11S)
    assert eng.axis_busy(1)
    assert eng.wait(1) == 1


def test_busy_axis_rejects_second_command():
    eng = communicating()
    eng.start_pos(1, 100.0, SPEC_11S)
    with pytest.raises(AxisBusy):
        eng.start_pos(1, 50.0, SPEC_11S)


def test_unknown_axis_names_valid_ids():
    eng = communicating(axes=(1, 2, 3))
    with pytest.raises(UnknownAxis) as exc:
        eng.start_pos(99, 1.0, SPEC_11S)
    assert "1, 2, 3" in str(exc.value)


def test_wait_timeout():
    eng = communicating()
    eng.start_pos(1, 100.0, SPEC_11S)
    with pytest.raises(TimeoutExceeded):
        eng.wait(1, max_ticks=50)


# --- interpolated paths -------------------------------------------------------


def test_circular_quarter_turn_lands_on_axis():
    eng = communicating(axes=(1, 2))
    eng.start_pos(1, 100.0, ProfileSpec(velocity=1000.0, acceleration=10000.0))
    eng.wait(1)
    seg = PathSegment.circular((1, 2), (0.0, 0.0), 90.0,
                               ProfileSpec(velocity=50.0, acceleration=500.0))
    eng.start_path(seg)
    assert eng.axis_busy(1) and eng.axis_busy(2)
    eng.wait(1)
    assert eng.axis_position(1) == pytest.approx(0.0, abs=1e-9)
    assert eng.axis_position(2) == pytest.approx(100.0, abs=1e-9)


def test_path_claims_all_axes():
    eng = communicating(axes=(1, 2))
    eng.start_pos(2, 500.0, SPEC_11S)
    seg = PathSegment.linear((1, 2), (3.0, 4.0), SPEC_11S)
    with pytest.raises(AxisBusy):
        eng.start_path(seg)


def test_helical_needs_three_axes():
    eng = communicating(axes=(1, 2))
    eng.start_pos(1, 10.0, ProfileSpec(velocity=100.0, acceleration=1000.0))
    eng.wait(1)
    seg = PathSegment.helical((1, 2), (0.0, 0.0), 90.0, 5.0, SPEC_11S)
    with pytest.raises(DimensionMismatch):
        eng.start_path(seg)


# --- logging ------------------------------------------------------------------


def test_hundred_ticks_log_one_row_each():
    eng = communicating()
    eng.start_log(axes=[1])
    eng.sleep_ticks(100)
    log = eng.stop_log()
    assert log.n_rows == 100
    assert log.column("t_ms").tolist() == list(map(float, range(1, 101)))


def test_log_cadence_is_one_ms():
    eng = communicating()
    eng.start_log(axes=[1], input_bits=[0], output_bits=[0])
    eng.start_pos(1, 5.0, SPEC_11S)
    eng.wait(1)
    eng.sleep_ticks(7)
    log = eng.stop_log()
    assert np.all(np.diff(log.column("t_ms")) == 1.0)


def test_double_start_log_rejected():
    eng = communicating()
    eng.start_log(axes=[1])
    with pytest.raises(AlreadyLogging):
        eng.start_log(axes=[2])


def test_stop_without_start_rejected():
    eng = communicating()
    with pytest.raises(NotLogging):
        eng.stop_log()


def test_log_columns_fixed_at_start():
    eng = communicating(axes=(1, 2, 3))
    eng.start_log(axes=[3, 1], input_bits=[5], output_bits=[2, 7])
    eng.sleep_ticks(1)
    log = eng.stop_log()
    assert log.columns == ["t_ms", "ax3_pos", "ax3_vel", "ax1_pos", "ax1_vel",
                           "in5", "out2", "out7"]
    assert log.axis_ids() == [3, 1]
    assert log.input_bit_ids() == [5]
    assert log.output_bit_ids() == [2, 7]


def test_csv_round_trip():
    eng = communicating()
    eng.start_log(axes=[1], input_bits=[0], output_bits=[3])
    eng.start_pos(1, 2.0, SPEC_11S)
    eng.wait(1)
    log = eng.stop_log()
    text = log.to_csv()
    assert text.endswith("\n")
    back = log.from_csv_text(text)
    assert back.columns == log.columns
    assert back.to_csv() == text


# --- I/O ----------------------------------------------------------------------


def test_output_appears_in_next_row():
    eng = communicating()
    eng.start_log(axes=[1], output_bits=[3])
    eng.sleep_ticks(10)
    eng.set_output_bit(3, 1)
    eng.sleep_ticks(1)
    log = eng.stop_log()
    col = log.column_index("out3")
    assert log.rows[9][col] == 0  # t=10 sampled before the write
    assert log.rows[10][col] == 1


def test_unset_input_reads_zero():
    eng = communicating()
    assert eng.read_input(7) == 0


def test_out_of_range_bits_rejected():
    eng = communicating()
    with pytest.raises(UnknownBit):
        eng.set_output_bit(999, 1)
    with pytest.raises(UnknownBit):
        eng.read_input(-1)
    with pytest.raises(UnknownBit):
        eng.set_output_bit(3, 2)


# --- events -------------------------------------------------------------------


def expected_crossing_tick(start, target, spec, predicate):
    """First 1 ms tick whose planned sample satisfies ``predicate``."""
    plan = plan_profile(start, target, spec)
    n = int(np.ceil(plan.total_duration * 1000.0 - 1e-6))
    ts = np.arange(1, n + 1) * 1e-3
    pos, _, _ = plan.sample_many(ts)
    hits = np.nonzero(predicate(pos))[0]
    assert hits.size, "predicate never satisfied on the plan"
    return int(hits[0]) + 1


def test_distance_to_target_fires_on_first_crossing():
    spec = ProfileSpec(velocity=1500.0, acceleration=20000.0)
    want = expected_crossing_tick(0.0, 1200.0, spec, lambda p: p >= 700.0)

    eng = communicating()
    eng.set_event_input(EventBinding(id=1, condition=DistanceToTarget(axis=3, value=500.0)))
    eng.start_pos(3, 1200.0, spec)
    ticks = eng.wait_event(1)
    assert ticks == want
    assert eng.axis_position(3) >= 700.0


def test_distance_to_target_idle_axis_never_fires():
    eng = communicating()
    eng.set_event_input(EventBinding(id=1, condition=DistanceToTarget(axis=1, value=500.0)))
    with pytest.raises(TimeoutExceeded):
        eng.wait_event(1, max_ticks=20)


def test_position_reached_crossing():
    spec = ProfileSpec(velocity=10.0, acceleration=100.0)
    want = expected_crossing_tick(0.0, 50.0, spec, lambda p: p >= 25.0)
    eng = communicating()
    eng.set_event_input(EventBinding(id=4, condition=PositionReached(axis=1, value=25.0)))
    eng.start_pos(1, 50.0, spec)
    assert eng.wait_event(4) == want


def test_condition_true_at_arm_fires_next_tick():
    eng = communicating()
    eng.set_input_bit(2, 1)
    eng.set_event_input(EventBinding(id=9, condition=InputEdge(bit=2, level=1)))
    assert eng.wait_event(9) == 1


def test_input_edge_never_fires_without_stimulus():
    eng = communicating()
    eng.set_event_input(EventBinding(id=1, condition=InputEdge(bit=5, level=1)))
    with pytest.raises(TimeoutExceeded):
        eng.wait_event(1, max_ticks=100)


def test_event_action_runs_one_tick_after_latch():
    eng = communicating()
    eng.start_log(axes=[1], output_bits=[0])
    eng.set_event_input(EventBinding(id=1, condition=InputEdge(bit=0, level=1),
                                     action=SetOutputAction(bit=0, level=1)))
    eng.sleep_ticks(3)
    eng.set_input_bit(0, 1)
    eng.sleep_ticks(3)
    log = eng.stop_log()
    out = log.column("out0").tolist()
    # stimulus lands before tick 4, latch on tick 4, action start of tick 5
    assert out == [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]


def test_event_action_is_one_shot():
    eng = communicating()
    eng.set_event_input(EventBinding(id=1, condition=InputEdge(bit=0, level=1),
                                     action=SetOutputAction(bit=6, level=1)))
    eng.set_input_bit(0, 1)
    eng.sleep_ticks(2)
    assert eng.read_output(6) == 1
    eng.set_output_bit(6, 0)
    eng.set_input_bit(0, 0)
    eng.set_input_bit(0, 1)  # condition holds again; must not re-fire
    eng.sleep_ticks(5)
    assert eng.read_output(6) == 0
    assert eng.snapshot().events_latched == {1: True}


def test_event_starts_motion():
    spec = ProfileSpec(velocity=100.0, acceleration=1000.0)
    eng = communicating()
    eng.set_event_input(EventBinding(id=2, condition=InputEdge(bit=1, level=1),
                                     action=StartPosAction(axis=2, target=25.0, spec=spec)))
    eng.set_input_bit(1, 1)
    eng.sleep_ticks(1)   # latch
    assert not eng.axis_busy(2)
    eng.sleep_ticks(1)   # pending action installs the move
    assert eng.axis_busy(2)
    eng.wait(2)
    assert eng.axis_position(2) == 25.0


def test_duplicate_event_id_rejected():
    eng = communicating()
    eng.set_event_input(EventBinding(id=1, condition=InputEdge(bit=0, level=1)))
    with pytest.raises(DuplicateEvent):
        eng.set_event_input(EventBinding(id=1, condition=InputEdge(bit=1, level=1)))


def test_event_condition_validated():
    eng = communicating()
    with pytest.raises(UnknownAxis):
        eng.set_event_input(EventBinding(id=1, condition=DistanceToTarget(axis=99, value=1.0)))
    with pytest.raises(UnknownBit):
        eng.set_event_input(EventBinding(id=2, condition=InputEdge(bit=999, level=1)))


def test_attach_action_guards():
    eng = communicating()
    with pytest.raises(UnknownEvent):
        eng.attach_event_action(5, SetOutputAction(bit=0, level=1))
    eng.set_event_input(EventBinding(id=5, condition=InputEdge(bit=0, level=1)))
    eng.set_input_bit(0, 1)
    eng.sleep_ticks(1)
    with pytest.raises(EventAlreadyLatched):
        eng.attach_event_action(5, SetOutputAction(bit=0, level=1))


def test_wait_on_unknown_event():
    eng = communicating()
    with pytest.raises(UnknownEvent):
        eng.wait_event(42)


# --- determinism and channel independence --------------------------------------


def scripted_run():
    eng = communicating(axes=(1, 2))
    eng.start_log(axes=[1, 2], input_bits=[0], output_bits=[0])
    eng.set_event_input(EventBinding(id=1, condition=PositionReached(axis=1, value=40.0),
                                     action=SetOutputAction(bit=0, level=1)))
    eng.start_pos(1, 80.0, ProfileSpec(velocity=20.0, acceleration=100.0))
    eng.start_pos(2, -35.5, ProfileSpec(velocity=50.0, acceleration=400.0), channel=1)
    eng.wait(1)
    eng.wait(2)
    eng.sleep_ticks(3)
    return eng.stop_log().to_csv()


def test_identical_runs_are_byte_identical():
    assert scripted_run() == scripted_run()


def test_channel_independence():
    """Two disjoint-axis moves in one run match two isolated runs."""
    spec_a = ProfileSpec(velocity=20.0, acceleration=100.0)
    spec_b = ProfileSpec(velocity=7.0, acceleration=49.0)
    n_ticks = 6000

    eng = communicating(axes=(1, 2))
    eng.start_log(axes=[1, 2])
    eng.start_pos(1, 60.0, spec_a, channel=0)
    eng.start_pos(2, -21.0, spec_b, channel=1)
    eng.sleep_ticks(n_ticks)
    merged = eng.stop_log()

    solo = {}
    for axis, target, spec in [(1, 60.0, spec_a), (2, -21.0, spec_b)]:
        e = communicating(axes=(1, 2))
        e.start_log(axes=[axis])
        e.start_pos(axis, target, spec)
        e.sleep_ticks(n_ticks)
        solo[axis] = e.stop_log()

    for axis in (1, 2):
        for col in (f"ax{axis}_pos", f"ax{axis}_vel"):
            assert merged.column(col).tolist() == solo[axis].column(col).tolist()


def test_two_channels_visible_in_snapshot():
    eng = communicating(axes=(1, 2))
    h1 = eng.start_pos(1, 100.0, SPEC_11S, channel=0)
    h2 = eng.start_pos(2, 100.0, SPEC_11S, channel=7)
    snap = eng.snapshot()
    assert snap.active_channels == {0: (h1.id,), 7: (h2.id,)}
    assert set(snap.busy_axes) == {1, 2}
