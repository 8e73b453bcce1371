"""Embedded simulator: determinism, collisions, injectors and scenario files."""
import numpy as np
import pytest

from simvar.app.errors import ScenarioError
from simvar.app.metrics.audit import audit_run_set
from simvar.app.metrics.variance import deviation_series, max_variance
from simvar.app.minisim.catalog import CATALOG, COLLISION_FREE
from simvar.app.minisim.engine import simulate
from simvar.app.minisim.injectors import EnvironmentContext
from simvar.app.minisim.physics import PROFILES, ActorState, resolve_collision
from simvar.app.minisim.scenario import (
    ActorKind,
    dump_scenario,
    load_scenario,
    resolve_scenario,
    write_scenario_file,
)
from simvar.app.selftest import repeat
from simvar.app.trace.codec import fingerprint

ENTROPY_SEED = 4242


def _jittered(scenario_id: str, jitter: float = 0.01):
    return CATALOG[scenario_id]().with_injectors(collision_impulse_jitter=jitter, entropy_seed=ENTROPY_SEED)


def _actor(actor_id: str, kind: ActorKind, x: float, y: float, vx: float, vy: float = 0.0) -> ActorState:
    profile = PROFILES[kind]
    return ActorState(actor_id, kind, profile, profile.radius, 1.0, [(x, y)], x, y, vx, vy)


class TestDeterminism:
    @pytest.mark.parametrize("scenario_id", sorted(CATALOG))
    def test_same_seed_same_rows(self, scenario_id):
        spec = CATALOG[scenario_id]()
        first = simulate(spec, seed=3)
        second = simulate(spec, seed=3, run_index=7, environment=EnvironmentContext(util_target=75.0, priority=19))
        assert fingerprint(first) == fingerprint(second)
        assert first.metadata["util_target"] == "0"
        assert second.metadata["util_target"] == "75"

    @pytest.mark.parametrize("load", [0.0, 75.0])
    @pytest.mark.parametrize("scenario_id", sorted(CATALOG))
    def test_repeats_are_bit_identical(self, scenario_id, load):
        rs = repeat(CATALOG[scenario_id](), 5, environment=EnvironmentContext(util_target=load))
        psi, _ = max_variance(rs)
        assert len({fingerprint(run) for run in rs.runs}) == 1
        assert psi == 0.0

    def test_fixed_step_count(self):
        spec = CATALOG["test1"]().with_overrides(max_sim_time=2.0)
        trace = simulate(spec, seed=0)
        assert trace.metadata["physics_steps"] == "40"
        assert trace.metadata["ticks"] == "20"
        assert len(trace.samples) == 21 * 2
        assert trace.samples[-1].t == 2.0

    def test_spawn_spread_uses_the_seed(self):
        spec = CATALOG["test1"]().with_overrides(spawn_spread=0.5)
        assert fingerprint(simulate(spec, seed=1)) == fingerprint(simulate(spec, seed=1))
        assert fingerprint(simulate(spec, seed=1)) != fingerprint(simulate(spec, seed=2))

    @pytest.mark.parametrize("scenario_id", COLLISION_FREE)
    def test_collision_free_scenarios(self, scenario_id):
        assert simulate(CATALOG[scenario_id](), seed=0).collision_times() == []


class TestCollisions:
    def test_stop_on_collision(self):
        spec = CATALOG["test2"]().with_overrides(stop_on_collision=True)
        trace = simulate(spec, seed=0)
        last_t = trace.samples[-1].t
        assert trace.collision_times()
        assert min(trace.collision_times()) == last_t
        assert trace.collisions() == [("v1", "v2")]
        assert trace.tick_of(last_t) == int(trace.metadata["ticks"])

    def test_pedestrian_destroyed_by_vehicle(self):
        trace = simulate(CATALOG["test4"](), seed=0)
        ped = trace.samples_for("ped")
        assert ped[-1].event.is_destroyed
        assert not any(s.event.is_destroyed for s in ped[:-1])
        assert trace.samples[-1].t > ped[-1].t
        assert ("ped", "v2") in trace.collisions()

    def test_pedestrians_collide_head_on(self):
        trace = simulate(CATALOG["test6"](), seed=0)
        assert trace.collisions() == [("ped1", "ped2")]

    def test_equal_masses_exchange_velocities(self):
        a = _actor("a", ActorKind.VEHICLE, 0.0, 0.0, 2.0)
        b = _actor("b", ActorKind.VEHICLE, 1.5, 0.0, -2.0)
        outcome = resolve_collision(a, b, restitution=1.0)
        assert outcome.velocity_a == pytest.approx((-2.0, 0.0), abs=1e-9)
        assert outcome.velocity_b == pytest.approx((2.0, 0.0), abs=1e-9)
        assert outcome.events["a"].other == "b"
        assert outcome.destroyed == ()

    def test_separating_pair_is_ignored(self):
        a = _actor("a", ActorKind.VEHICLE, 0.0, 0.0, -2.0)
        b = _actor("b", ActorKind.VEHICLE, 1.5, 0.0, 2.0)
        assert resolve_collision(a, b, restitution=0.5) is None

    def test_vehicle_destroys_pedestrian(self):
        v = _actor("v1", ActorKind.VEHICLE, 0.0, 0.0, 5.0)
        p = _actor("ped", ActorKind.PEDESTRIAN, 1.0, 0.0, 0.0)
        outcome = resolve_collision(v, p, restitution=0.5)
        assert outcome.destroyed == ("ped",)
        assert outcome.events["ped"].is_destroyed
        assert outcome.events["v1"].other == "ped"

    def test_impulse_jitter_is_bounded(self):
        a = _actor("a", ActorKind.VEHICLE, 0.0, 0.0, 2.0)
        b = _actor("b", ActorKind.VEHICLE, 1.5, 0.3, -2.0)
        plain = resolve_collision(a, b, 0.5)
        jittered = resolve_collision(a, b, 0.5, jitter=0.01, rng=np.random.default_rng(0))
        deltas = np.subtract(jittered.velocity_a + jittered.velocity_b, plain.velocity_a + plain.velocity_b)
        assert np.all(np.abs(deltas) <= 0.01)
        assert np.any(deltas != 0)

    def test_jitter_needs_a_generator(self):
        a = _actor("a", ActorKind.VEHICLE, 0.0, 0.0, 2.0)
        b = _actor("b", ActorKind.VEHICLE, 1.5, 0.0, -2.0)
        with pytest.raises(ValueError, match="random generator"):
            resolve_collision(a, b, 0.5, jitter=0.01)


class TestInjectors:
    def test_post_collision_jitter_leaves_pre_collision_exact(self):
        spec = CATALOG["test2"]().with_injectors(collision_impulse_jitter=0.01, entropy_seed=ENTROPY_SEED)
        result = audit_run_set(repeat(spec, 8), 0.01)
        assert result.t_split is not None
        assert result.pre_collision_max_deviation == 0.0
        assert result.post_collision_max_deviation > 0.01

    def test_entropy_seed_reproduces_a_run(self):
        spec = CATALOG["test3"]().with_injectors(sum_order_shuffle=True, entropy_seed=ENTROPY_SEED)
        assert fingerprint(simulate(spec, 0, run_index=4)) == fingerprint(simulate(spec, 0, run_index=4))

    def test_glitch_spreads_runs(self):
        spec = CATALOG["test1"]().with_injectors(glitch_probability=1.0, glitch_magnitude=1.0, entropy_seed=ENTROPY_SEED)
        psi, _ = max_variance(repeat(spec, 10))
        assert psi > 0.0

    def test_load_gated_timestep_jitter_is_inert_below_threshold(self):
        spec = CATALOG["test1"]().with_injectors(
            timestep_jitter=True,
            timestep_jitter_probability=1.0,
            timestep_jitter_load_threshold=50.0,
            entropy_seed=ENTROPY_SEED,
        )
        idle = simulate(spec, 0, environment=EnvironmentContext(util_target=25.0))
        assert idle.metadata["physics_steps"] == str(2 * int(idle.metadata["ticks"]))
        baseline = simulate(CATALOG["test1"](), 0)
        assert fingerprint(idle) == fingerprint(baseline)

    def test_describe_names_enabled_injectors(self):
        spec = CATALOG["test2"]().with_injectors(collision_impulse_jitter=0.01, entropy_seed=7)
        assert simulate(spec, 0).metadata["injectors"] == "collision_impulse_jitter=0.01,entropy_seed=7"
        assert simulate(CATALOG["test2"](), 0).metadata["injectors"] == "none"


class TestCollisionShapes:
    @pytest.mark.parametrize("scenario_id", ["test2", "test4"])
    def test_split_at_the_first_collision(self, scenario_id):
        rs = repeat(_jittered(scenario_id), 8)
        result = audit_run_set(rs, 0.01)
        assert result.t_split == min(t for run in rs.runs for t in run.collision_times())
        assert result.pre_collision_max_deviation == 0.0
        assert result.post_collision_max_deviation > 0.01

    def test_follower_diverges_only_after_the_collision(self):
        rs = repeat(_jittered("test4"), 8)
        t_split = min(t for run in rs.runs for t in run.collision_times())
        entries = deviation_series(rs, "v1").entries
        assert max(e.deviation for e in entries if e.t <= t_split) == 0.0
        assert any(e.deviation > 0.0 for e in entries if e.t > t_split)

    def test_deviation_grows_with_the_jitter(self):
        values = [
            audit_run_set(repeat(_jittered("test2", eps), 8), 0.01).post_collision_max_deviation or 0.0
            for eps in (0.0, 1e-4, 1e-2)
        ]
        assert values[0] == 0.0
        assert values[0] <= values[1] < values[2]


class TestScenarioFiles:
    def test_yaml_round_trip(self, tmp_path):
        spec = CATALOG["test4"]()
        assert load_scenario(dump_scenario(spec)) == spec
        path = write_scenario_file(spec, tmp_path / "test4.yaml")
        assert resolve_scenario(str(path)) == spec

    def test_header_required(self):
        with pytest.raises(ScenarioError, match="must start with"):
            load_scenario("scenario_id: x\n")

    def test_unknown_reference(self):
        with pytest.raises(ScenarioError, match="unknown scenario 'test9'"):
            resolve_scenario("test9")

    def test_log_interval_must_divide(self):
        with pytest.raises(ScenarioError, match="integer multiple of dt_physics"):
            CATALOG["test1"]().with_overrides(log_interval=0.07)

    def test_unknown_injector(self):
        with pytest.raises(ScenarioError, match="invalid injector settings"):
            CATALOG["test1"]().with_injectors(cosmic_rays=True)

    def test_actor_outside_map(self):
        data = CATALOG["test1"]().model_dump()
        data["actors"][0]["goal"] = {"x": 80.0, "y": 10.0, "z": 0.0}
        with pytest.raises(ScenarioError, match="outside the map"):
            CATALOG["test1"]().with_overrides(actors=data["actors"])
