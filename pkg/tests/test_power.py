import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dvfsched.bundled import bundled_processor
from dvfsched.power import (PowerModel, PowerSample, active_power, critical_speed,
                            energy_density, fit_power_model, least_squares_fit, load_processor,
                            mape, processor_to_dict, total_energy)
from dvfsched.schedule import Schedule, Segment

XS = PowerModel(1524.92, 3.0269, 75.1092, 40, s_min=F(15, 100))
PPC = PowerModel(736.87, 2.0990, 13.1333, 12, s_min=F(1, 10))


def test_active_power_examples():
    assert active_power(XS, 1) == pytest.approx(1600.0292)
    assert active_power(PowerModel(0, 2, 30, 10), 1) == 30
    assert active_power(PPC, F(3, 10)) == pytest.approx(736.87 * 0.3 ** 2.099 + 13.1333)
    assert active_power(PPC, F(3, 10)) == pytest.approx(72.0, abs=0.05)


def test_energy_density_examples():
    assert energy_density(XS, 0, 1) == 0
    assert energy_density(XS, 1, 1) == pytest.approx(1560.03, abs=0.01)
    assert energy_density(XS, F(1, 2), F(3, 5)) == pytest.approx(energy_density(XS, 1, F(3, 5)) / 2)


def test_total_energy_examples():
    empty = Schedule(2, 10, [], validated=True)
    rep = total_energy(empty, XS)
    assert (rep.objective, rep.total) == (0, 800)
    one = Schedule(1, 10, [Segment(1, "T1", 1, F(1), F(0), F(2))], validated=True)
    rep = total_energy(one, XS)
    assert rep.objective == pytest.approx(2 * (active_power(XS, 1) - 40))
    assert rep.objective == pytest.approx(3120.06, abs=0.01)
    assert rep.total == pytest.approx(3520.06, abs=0.01)
    half = Schedule(1, 10, [Segment(1, "T1", 1, F(1, 2), F(0), F(4))], validated=True)
    direct = 4 * (1524.92 * 0.5 ** 3.0269 + 75.1092 - 40)
    assert total_energy(half, XS).objective == pytest.approx(direct)
    assert total_energy(half, XS).objective < total_energy(one, XS).objective
    with pytest.raises(ValueError):
        total_energy(Schedule(1, 10, []), XS)


def test_model_validation():
    with pytest.raises(ValueError):
        PowerModel(1, 2, 0, 10, s_min=F(1, 10))  # net power negative at s_min
    with pytest.raises(ValueError):
        PowerModel(1, 2, 20, 10, speed_levels=(F(1, 2), F(3, 4)))
    with pytest.raises(ValueError):
        PowerModel(1, 0.5, 20, 10)


def test_mape_of_reference_models():
    xs, ppc = bundled_processor("xscale"), bundled_processor("powerpc405lp")
    assert mape(xs.model(), xs.samples) == pytest.approx(1.1236, abs=2e-3)
    assert mape(ppc.model(), ppc.samples) == pytest.approx(5.2323, abs=2e-3)
    exact = [PowerSample(s.speed, active_power(XS, s.speed)) for s in xs.samples]
    assert mape(XS, exact) == pytest.approx(0, abs=1e-12)


def test_fit_reproduces_reference_fit():
    for name, limit in (("xscale", 1.23), ("powerpc405lp", 5.33)):
        spec = bundled_processor(name)
        pm = fit_power_model(spec.samples, spec.p_idle, spec.f_max)
        assert mape(pm, spec.samples) <= limit
    spec = bundled_processor("xscale")
    pm = fit_power_model(spec.samples, spec.p_idle, spec.f_max)
    assert (pm.alpha, pm.beta, pm.p_static) == pytest.approx((1525.0, 3.027, 75.11), rel=2e-3)


def test_fit_round_trip():
    truth = PowerModel(1000, 2, 50, 10)
    samples = [PowerSample(F(k, 10), active_power(truth, F(k, 10))) for k in range(2, 11)]
    pm = fit_power_model(samples, 10, 1000)
    assert mape(pm, samples) < 0.01
    assert (pm.alpha, pm.beta, pm.p_static) == pytest.approx((1000, 2, 50), rel=1e-2)
    ls = least_squares_fit(samples, 10, 1000)
    assert mape(ls, samples) < 0.5


def test_fit_needs_three_samples():
    with pytest.raises(ValueError):
        fit_power_model([PowerSample(F(1), 10), PowerSample(F(1, 2), 5)], 1, 1000)


def test_critical_speed_examples():
    pm = PowerModel(2, 3, 1, F(1, 10**9), s_min=F(1, 100))
    scan = np.arange(0.01, 1.0, 1e-6)
    ref = scan[np.argmin((2 * scan ** 3 + 1 - 1e-9) / scan)]
    assert critical_speed(pm) == pytest.approx(0.25 ** (1 / 3), abs=1e-6)
    assert critical_speed(pm) == pytest.approx(ref, abs=2e-6)
    linear = PowerModel(5, 1, 10, 10, s_min=F(1, 10))
    assert critical_speed(linear) == pytest.approx(1)
    s = np.arange(0.15, 1.0, 1e-6)
    e = (XS.alpha * s ** XS.beta + XS.p_static - XS.p_idle) / s
    assert critical_speed(XS) == pytest.approx(s[np.argmin(e)], abs=2e-6)


def test_processor_files(tmp_path):
    spec = bundled_processor("xscale")
    assert [float(s) for s in spec.levels] == [0.15, 0.4, 0.6, 0.8, 1.0]
    assert spec.p_idle == 40 and spec.f_max == 1000
    p = tmp_path / "p.json"
    import json
    p.write_text(json.dumps(processor_to_dict(spec)))
    again = load_processor(p)
    assert again.levels == spec.levels and again.fitted == spec.fitted
    p.write_text('{"levels": []}')
    with pytest.raises(ValueError):
        load_processor(p)


@settings(max_examples=60, deadline=None)
@given(st.floats(50, 3000), st.floats(1.2, 4.0), st.floats(20, 200), st.floats(1, 19))
def test_net_power_positive_and_increasing(alpha, beta, ps, pidle):
    pm = PowerModel(alpha, beta, ps, pidle, s_min=F(1, 10))
    s = np.linspace(0.1, 1, 50)
    net = [pm.net_power(x) for x in s]
    assert min(net) > 0 and all(b >= a for a, b in zip(net, net[1:]))
    sc = critical_speed(pm)
    assert 0.1 - 1e-9 <= sc <= 1 + 1e-9
    assert pm.energy_per_work(sc) <= min(pm.energy_per_work(x) for x in s) + 1e-6
