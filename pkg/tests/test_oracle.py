import dataclasses

import numpy as np
import pytest

from mimoswitch.channel import draw_channel
from mimoswitch.combinatorics import Permutation
from mimoswitch.oracle import simulate_slot, verify_design
from mimoswitch.relay import SchemeConfig, SystemParams, build_beamformer, design

P1 = Permutation.from_one_based((4, 3, 2, 1))
PARAMS = SystemParams(1.0, 0.1, 0.1)
GRID = tuple(round(0.05 * k, 2) for k in range(41))


def _setup(seed=1, kind="basic-real"):
    ch, _ = draw_channel(4, np.random.default_rng(seed))
    d = design(ch, P1, PARAMS, SchemeConfig(kind, b_grid=GRID), np.random.default_rng(seed))
    return ch, d


@pytest.mark.parametrize("kind", ["basic-real", "counter-phase", "nc-real", "nc-random-phase"])
def test_noiseless_exact(kind):
    ch, d = _setup(2, kind)
    tr = simulate_slot(d, ch, None, 2000, np.random.default_rng(0))
    assert tr.residual_interference.max() <= 1e-20
    assert np.all(tr.noise_power <= 1e-20 * tr.signal_power)


@pytest.mark.parametrize("kind", ["basic-real", "random-phase", "nc-random-phase"])
def test_sinr_converges(kind):
    ch, d = _setup(3, kind)
    report = verify_design(d, ch, PARAMS, 10**6, 0.03, np.random.default_rng(5))
    assert report.passed, report.lines()
    tr = report.trace
    assert np.allclose(tr.sinr, 1 / d.sigma_e_sq, rtol=0.03)
    assert tr.relay_power == pytest.approx(PARAMS.p, rel=0.02)


def test_cancellation_matters():
    ch, d = _setup(2, "nc-real")
    assert d.b_scalar > 0
    on = simulate_slot(d, ch, PARAMS, 2 * 10**5, np.random.default_rng(1))
    off = simulate_slot(d, ch, PARAMS, 2 * 10**5, np.random.default_rng(1), cancel_self=False)
    assert np.all(off.sinr < on.sinr)
    # the leftover is the echo b_j x_j, independent of the intended symbol
    assert np.allclose(off.noise_power - on.noise_power, np.abs(d.b) ** 2, rtol=0.05)


def test_cancellation_noop_without_echo():
    ch, d = _setup(4, "basic-real")
    a = simulate_slot(d, ch, PARAMS, 5000, np.random.default_rng(2))
    b = simulate_slot(d, ch, PARAMS, 5000, np.random.default_rng(2), cancel_self=False)
    assert np.array_equal(a.sinr, b.sinr)


def test_perturbed_gains_fail_fairness():
    ch, d = _setup(5)
    a = d.a * np.array([1.1, 1.0, 1.0, 1.0])
    bad = dataclasses.replace(d, a=a, g=build_beamformer(ch, P1, a, d.b))
    report = verify_design(bad, ch, PARAMS, 10**6, 0.05, np.random.default_rng(0))
    assert not report.passed
    assert any(c.name == "fairness" for c in report.failures)


def test_power_mismatch_detected():
    ch, d = _setup(6)
    half = SystemParams(PARAMS.p / 2, PARAMS.sigma_sq, PARAMS.sigma_r_sq)
    report = verify_design(d, ch, half, 10**5, 0.05, np.random.default_rng(0))
    assert [c.name for c in report.failures if c.name == "relay-power"] == ["relay-power"]


def test_size_mismatch():
    ch, d = _setup(1)
    ch3, _ = draw_channel(3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate_slot(d, ch3, PARAMS, 10, np.random.default_rng(0))
