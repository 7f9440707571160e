"""Closed-loop tests for the per-cycle control pipeline.

These drive operator tick trajectories into the assembled loop
(firmware + retarget + virtual hand + shadow) and check the emergent
virtual-wall behavior, plus the snapshot/resume contract that episode
replay relies on.
"""

import pytest

from dexmouse.assets import profile_path, scenario_path
from dexmouse.core import cycle_to_ns
from dexmouse.firmware import ForceFeedbackParams, GainMode
from dexmouse.pipeline import ControlPipeline
from dexmouse.retarget import inverse_map, load_profile
from dexmouse.simhand import Scenario, ScenarioEvent, load_scenario

PROFILE = load_profile(profile_path("igrisc-11dof"))
PARAMS = ForceFeedbackParams()
SPAN = PROFILE.ranges[0].q_max - PROFILE.ranges[0].q_min

FREE = Scenario(name="free", initial_blocks=(None,) * 5, events=())
WALL = Scenario(name="wall", initial_blocks=(0.6, None, None, None, None), events=())


def ticks_at(u: float, channel: int = 0) -> int:
    """Operator flexion u -> raw ticks on one channel (flexion lowers ticks)."""
    rng = PROFILE.ranges[channel]
    return round(rng.q_max - u * (rng.q_max - rng.q_min))


def open_hand() -> list[int]:
    return [PROFILE.ranges[c].q_max for c in range(5)]


def run(pipe: ControlPipeline, trajectory, aa_raw: int = 2048):
    results = []
    for cycle, fe in enumerate(trajectory):
        results.append(pipe.step(cycle, fe, aa_raw))
    return results


def closing_trajectory(u_target: float, cycles: int, rate_ticks: int = 15):
    """Close channel 0 toward u_target at a sub-threshold tick rate,
    other channels held open."""
    fe = open_hand()
    floor = ticks_at(u_target)
    for _ in range(cycles):
        fe = list(fe)
        fe[0] = max(floor, fe[0] - rate_ticks)
        yield fe


def test_free_tracking_renders_zero_torque():
    pipe = ControlPipeline(PROFILE, FREE, PARAMS)
    for res in run(pipe, closing_trajectory(0.9, 200)):
        assert res.outputs.tau_cmd == (0.0,) * 5
        assert res.contacts == (False,) * 5


def test_wall_produces_torque_only_after_epsilon_penetration():
    pipe = ControlPipeline(PROFILE, WALL, PARAMS)
    eps_u = PARAMS.epsilon / SPAN
    for res in run(pipe, closing_trajectory(0.9, 300)):
        # Operator position this cycle, in flexion units.
        u_op = (PROFILE.ranges[0].q_max - res.state.q_operator[0]) / SPAN
        if u_op <= 0.6:
            assert res.outputs.tau_cmd[0] == 0.0
        elif u_op > 0.6 + eps_u + 0.02:  # comfortably past the dead zone
            assert res.outputs.tau_cmd[0] > 0.0
            assert res.outputs.gain_mode[0] is GainMode.CONTACT
            assert res.contacts[0] is True


def test_torque_clears_within_one_cycle_of_withdrawal():
    pipe = ControlPipeline(PROFILE, WALL, PARAMS)
    deep = list(closing_trajectory(0.9, 300))
    results = run(pipe, deep)
    assert results[-1].outputs.tau_cmd[0] > 0.0
    # Operator snaps back out of the wall; the very next cycle is quiet.
    out = list(deep[-1])
    out[0] = ticks_at(0.3)
    res = pipe.step(300, out, 2048)
    assert res.outputs.tau_cmd[0] == 0.0


def test_torque_monotone_in_penetration_depth():
    pipe = ControlPipeline(PROFILE, WALL, PARAMS)
    taus = [res.outputs.tau_cmd[0] for res in run(pipe, closing_trajectory(0.95, 320))]
    rising = [tau for tau in taus if tau > 0.0]
    assert rising, "wall was never engaged"
    assert all(b >= a for a, b in zip(rising, rising[1:]))
    assert max(taus) == PARAMS.tau_max  # deep penetration saturates


def test_torque_saturation_respects_tau_max_override():
    params = PARAMS.with_overrides({"tau_max": 123.0})
    pipe = ControlPipeline(PROFILE, WALL, params)
    taus = [res.outputs.tau_cmd[0] for res in run(pipe, closing_trajectory(0.95, 320))]
    assert max(taus) == 123.0


def test_untouched_channels_stay_quiet_against_wall():
    pipe = ControlPipeline(PROFILE, WALL, PARAMS)
    for res in run(pipe, closing_trajectory(0.9, 300)):
        assert res.outputs.tau_cmd[1:] == (0.0,) * 4
        assert res.contacts[1:] == (False,) * 4


def test_result_shadow_is_previous_cycle_hand_position():
    pipe = ControlPipeline(PROFILE, FREE, PARAMS)
    results = run(pipe, closing_trajectory(0.8, 100))
    for prev, cur in zip(results, results[1:]):
        assert cur.shadow.q_robot == inverse_map(prev.hand.u_actual, PROFILE)


def test_targets_carry_cycle_timestamp():
    pipe = ControlPipeline(PROFILE, FREE, PARAMS)
    results = run(pipe, closing_trajectory(0.5, 10))
    for res in results:
        assert res.targets.t == cycle_to_ns(res.cycle)


def test_scenario_event_displaces_hand_at_its_cycle():
    scenario = Scenario(
        name="drop-in",
        initial_blocks=(None,) * 5,
        events=(ScenarioEvent(cycle=50, channel=0, block=0.2),),
    )
    pipe = ControlPipeline(PROFILE, scenario, PARAMS)
    results = run(pipe, closing_trajectory(0.9, 60))
    assert results[49].hand.u_actual[0] > 0.2
    assert results[50].hand.u_actual[0] == 0.2  # displaced before stepping
    assert results[50].hand.blocks[0] == 0.2


def test_set_block_matches_scenario_event_semantics():
    scripted = ControlPipeline(
        PROFILE,
        Scenario(
            name="s",
            initial_blocks=(None,) * 5,
            events=(ScenarioEvent(cycle=50, channel=0, block=0.2),),
        ),
        PARAMS,
    )
    manual = ControlPipeline(PROFILE, FREE, PARAMS)
    for cycle, fe in enumerate(closing_trajectory(0.9, 80)):
        if cycle == 50:
            manual.set_block(0, 0.2)
        a = scripted.step(cycle, fe, 2048)
        b = manual.step(cycle, fe, 2048)
        assert a == b


def test_set_block_validation():
    pipe = ControlPipeline(PROFILE, FREE, PARAMS)
    with pytest.raises(ValueError):
        pipe.set_block(5, 0.5)
    with pytest.raises(ValueError):
        pipe.set_block(-1, 0.5)
    with pytest.raises(ValueError):
        pipe.set_block(0, 1.5)
    pipe.set_block(0, 0.5)
    pipe.set_block(0, None)  # removal is always legal
    assert pipe.hand.blocks == (None,) * 5


def test_snapshot_resume_is_bit_exact():
    trajectory = list(closing_trajectory(0.9, 400))
    pipe = ControlPipeline(PROFILE, load_scenario(scenario_path("pick_place")), PARAMS)
    for cycle in range(200):
        pipe.step(cycle, trajectory[cycle], 2048)
    snap = pipe.snapshot()

    resumed = ControlPipeline(
        PROFILE, load_scenario(scenario_path("pick_place")), PARAMS, resume=snap
    )
    for cycle in range(200, 400):
        a = pipe.step(cycle, trajectory[cycle], 2048)
        b = resumed.step(cycle, trajectory[cycle], 2048)
        assert a == b


def test_snapshot_is_json_safe():
    import json

    pipe = ControlPipeline(PROFILE, WALL, PARAMS)
    run(pipe, closing_trajectory(0.9, 50))
    snap = pipe.snapshot()
    assert json.loads(json.dumps(snap)) == snap


def test_fresh_snapshot_resumes_before_first_cycle():
    fresh = ControlPipeline(PROFILE, FREE, PARAMS)
    resumed = ControlPipeline(PROFILE, FREE, PARAMS, resume=fresh.snapshot())
    fe = open_hand()
    assert fresh.step(0, fe, 2048) == resumed.step(0, fe, 2048)


def test_set_params_changes_subsequent_gains():
    # Shallow enough penetration that the torque is not saturated.
    pipe = ControlPipeline(PROFILE, WALL, PARAMS)
    results = run(pipe, closing_trajectory(0.65, 200))
    tau_before = results[-1].outputs.tau_cmd[0]
    assert 0.0 < tau_before < PARAMS.tau_max
    pipe.set_params(PARAMS.with_overrides({"k_nominal": 2.5}))
    res = pipe.step(200, list(closing_trajectory(0.65, 200))[-1], 2048)
    # Same penetration, half the stiffness.
    assert res.outputs.tau_cmd[0] == tau_before / 2


def test_clamp_diagnostics_accumulate_on_overdrive():
    # Adroit knuckle maps saturate when the operator pushes to the rail.
    profile = load_profile(profile_path("adroit-30dof"))
    pipe = ControlPipeline(profile, FREE, PARAMS)
    fe = [profile.ranges[c].q_min for c in range(5)]  # fully closed
    for cycle in range(5):
        pipe.step(cycle, fe, 2048)
    assert pipe.clamp_diagnostics.total == 0  # endpoints are exact, not clamped

    pipe2 = ControlPipeline(profile, FREE, PARAMS)
    over = [profile.ranges[c].q_min - 50 for c in range(5)]  # past the rail
    for cycle in range(5):
        pipe2.step(cycle, over, 4095)
    assert pipe2.clamp_diagnostics.total > 0
