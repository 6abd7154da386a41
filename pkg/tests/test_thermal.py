import numpy as np
import pytest

import _oracle
from tclflex.errors import InvalidInputError
from tclflex.thermal import (
    ExogenousDay,
    ThermalParams,
    baseline_trajectory,
    equilibrium_power,
    hourly_to_steps,
    simulate_day,
    step,
)


def test_one_step_derived_value():
    food, air = step(ThermalParams(), (-18.0, -18.0), (1.0, 20.0, 0.0, 0.0), "day")
    assert food == pytest.approx(-18.0, abs=1e-12)
    assert air == pytest.approx(-18.0 + (0.25 / 0.077) * (38.0 / 41.05), abs=1e-9)
    assert round(air, 3) == -14.994


def test_defrost_adds_eps_per_step():
    p = ThermalParams()
    _, plain = step(p, (-18.0, -18.0), (0.0, 20.0, 0.0, 0.5), "night")
    _, thawing = step(p, (-18.0, -18.0), (0.0, 20.0, 1.0, 0.5), "night")
    assert thawing - plain == pytest.approx(p.eps, abs=1e-12)


def test_simulation_matches_reference():
    params = ThermalParams()
    exo = ExogenousDay.standard(params)
    rng = np.random.default_rng(0)
    power = rng.uniform(0.0, 1.2, params.J)
    traj = simulate_day(params, exo, power)
    tf, tc = _oracle.ref_simulate(
        power, od=exo.od, defrost=exo.defrost, day=_oracle.day_flags(params.J)
    )
    np.testing.assert_allclose(traj.t_food, tf, atol=1e-9)
    np.testing.assert_allclose(traj.t_air, tc, atol=1e-9)
    assert traj.t_food[0] == traj.t_air[0] == -18.0


@pytest.mark.parametrize("regime", ["day", "night"])
def test_equilibrium_power_holds_setpoint(regime):
    p = ThermalParams()
    power = equilibrium_power(p, regime, 20.0)
    assert step(p, (-18.0, -18.0), (1.0, 20.0, 0.0, power), regime) == pytest.approx((-18.0, -18.0), abs=1e-12)


def test_baseline_without_defrost_is_flat():
    params = ThermalParams()
    exo = ExogenousDay.standard(params, defrost_hours=())
    day = equilibrium_power(params, "day", 20.0)
    night = equilibrium_power(params, "night", 20.0)
    p_base = [day if 6 <= h < 22 else night for h in range(24)]
    traj = baseline_trajectory(params, exo, p_base)
    np.testing.assert_allclose(traj.t_food, -18.0, atol=1e-9)


def test_regime_follows_clock():
    params = ThermalParams()
    exo = ExogenousDay.standard(params)
    assert exo.regime(4 * 6 - 1, params.dt) == "night"
    assert exo.regime(4 * 6, params.dt) == "day"
    assert exo.regime(4 * 22, params.dt) == "night"


def test_hourly_to_steps_blocks():
    np.testing.assert_array_equal(hourly_to_steps([1, 2], 2), [1, 1, 2, 2])


@pytest.mark.parametrize("kwargs", [{"C_f": 0.0}, {"dt": 0.3}, {"J": 0}, {"R_cf": float("nan")}, {"J": 95}])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidInputError):
        ThermalParams(**kwargs)


def test_invalid_inputs():
    p = ThermalParams()
    with pytest.raises(InvalidInputError):
        step(p, (-18.0, float("nan")), (1.0, 20.0, 0.0, 0.0), "day")
    with pytest.raises(InvalidInputError):
        step(p, (-18.0, -18.0), (1.0, 20.0, 0.0, -1.0), "day")
    with pytest.raises(InvalidInputError):
        step(p, (-18.0, -18.0), (1.0, 20.0, 0.0, 0.0), "dusk")
    exo = ExogenousDay.standard(p)
    with pytest.raises(InvalidInputError):
        simulate_day(p, exo, np.zeros(10))
    with pytest.raises(InvalidInputError):
        ExogenousDay(np.full(4, 2.0), np.zeros(4), np.zeros(4))
    with pytest.raises(InvalidInputError):
        ExogenousDay(np.ones(4), np.zeros(4), np.full(4, 0.5))
