import math

import numpy as np
import pytest

from mimoswitch.channel import ChannelRealization, draw_channel
from mimoswitch.combinatorics import Permutation, enumerate_condensed_sets
from mimoswitch.errors import CurveRangeError
from mimoswitch.montecarlo import (
    CSV_COLUMNS,
    SweepConfig,
    channel_stream,
    db_gain,
    params_for_snr,
    phase_stream,
    read_sweep_csv,
    run_sweep,
    scheme_token,
    snr_to_noise,
)
from mimoswitch.relay import SchemeConfig, design

P1 = Permutation.from_one_based((4, 3, 2, 1))
GRID = tuple(round(0.1 * k, 1) for k in range(21))


def test_snr_to_noise():
    assert snr_to_noise(0) == (1.0, 1.0)
    assert snr_to_noise(10) == pytest.approx((0.1, 0.1), rel=1e-15)
    assert snr_to_noise(20) == pytest.approx((0.01, 0.01), rel=1e-15)
    with pytest.raises(ValueError):
        snr_to_noise(float("nan"))


def test_identity_override():
    cfg = SweepConfig(
        n=2, snr_points_db=(10.0,), num_realizations=1, permutation=Permutation.from_one_based((2, 1)),
        channel_override=ChannelRealization.identity(2),
    )
    row = run_sweep(cfg).rows[0]
    assert row.mean == pytest.approx(math.log2(1 + 1 / 0.32), abs=1e-9)
    assert abs(row.mean - 2.0443) < 1e-4


def _small(**kw):
    base = dict(n=4, snr_points_db=(0.0, 10.0, 20.0), num_realizations=12, permutation=P1, rng_seed=11,
                schemes=(SchemeConfig(), SchemeConfig("nc-real", b_grid=GRID),
                         SchemeConfig("random-phase", trials=5, name="r5")))
    base.update(kw)
    return SweepConfig(**base)


def test_determinism_and_chunking():
    a = run_sweep(_small()).to_csv()
    assert a == run_sweep(_small()).to_csv()
    assert a == run_sweep(_small(), chunk=5).to_csv()
    assert a == run_sweep(_small(), workers=2, chunk=4).to_csv()
    assert a != run_sweep(_small(rng_seed=12)).to_csv()


def test_adding_schemes_keeps_channels():
    one = run_sweep(_small(schemes=(SchemeConfig(),)))
    three = run_sweep(_small())
    assert np.array_equal(one.samples["basic-real"], three.samples["basic-real"])


def test_trial_prefix_shared():
    r5 = run_sweep(_small(schemes=(SchemeConfig("random-phase", trials=5),)))
    both = run_sweep(_small(schemes=(SchemeConfig("random-phase", trials=5, name="a"),
                                     SchemeConfig("random-phase", trials=20, name="b"))))
    assert np.array_equal(r5.samples["random-phase"], both.samples["a"])
    assert np.all(both.samples["b"] >= both.samples["a"])


def test_sweep_matches_single_design():
    res = run_sweep(_small())
    r = 3
    ch, _ = draw_channel(4, channel_stream(11, r))
    for scheme in _small().schemes:
        d = design(ch, P1, params_for_snr(10.0), scheme, phase_stream(11, r, scheme, P1))
        assert res.samples[scheme.label][r, 1] == pytest.approx(d.rate, rel=1e-12)


def test_sweep_invariants():
    res = run_sweep(_small(num_realizations=30))
    for lab in res.config.cell_labels:
        s = res.samples[lab]
        assert np.all(np.isfinite(s))
        assert np.all(np.diff(s, axis=1) > 0)  # throughput rises with SNR per realization
        _, mean = res.curve(lab)
        assert np.all(np.diff(mean) > 0)
    assert np.all(res.samples["nc-real"] >= res.samples["basic-real"])
    assert all(r.std_err >= 0 and math.isfinite(r.mean) for r in res.rows)


def test_standard_error_scaling():
    cfg = dict(n=4, snr_points_db=(10.0,), permutation=P1, rng_seed=5)
    se1 = run_sweep(SweepConfig(num_realizations=1000, **cfg)).rows[0].std_err
    se2 = run_sweep(SweepConfig(num_realizations=2000, **cfg)).rows[0].std_err
    assert se1 / se2 == pytest.approx(math.sqrt(2), rel=0.10)


def test_condensed_mode():
    sets = tuple(enumerate_condensed_sets(4))
    res = run_sweep(SweepConfig(n=4, snr_points_db=(10.0,), num_realizations=6, condensed_sets=sets, rng_seed=1))
    assert res.config.cell_labels == ["basic-real/Q1", "basic-real/Q2", "basic-real/Q3", "basic-real/Q4"]
    # cell value is the harmonic composition of the member rates
    ch, _ = draw_channel(4, channel_stream(1, 0))
    rates = [design(ch, d, params_for_snr(10.0)).rate for d in sets[0]]
    want = 3 / sum(1 / r for r in rates)
    assert res.samples["basic-real/Q1"][0, 0] == pytest.approx(want, rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(num_realizations=0, permutation=P1)
    with pytest.raises(ValueError):
        SweepConfig(snr_points_db=(float("inf"),), permutation=P1)
    with pytest.raises(ValueError):
        SweepConfig()
    with pytest.raises(ValueError):
        SweepConfig(permutation=P1, schemes=(SchemeConfig(), SchemeConfig()))


def test_csv_format(tmp_path):
    res = run_sweep(_small(num_realizations=3))
    text = res.to_csv({"note": "x"})
    lines = text.splitlines()
    assert lines[0] == "# mimoswitch sweep"
    assert "# seed=11" in lines and "# note=x" in lines
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert tuple(header.split(",")) == CSV_COLUMNS
    row = lines[lines.index(header) + 1].split(",")
    assert row[0] == "0" and row[1] == "basic-real"
    assert len(row[2].replace(".", "").lstrip("0")) <= 12
    curves = read_sweep_csv(text)
    assert set(curves) == {"basic-real", "nc-real", "r5"}
    path = tmp_path / "s.csv"
    res.write_csv(path)
    x, y = read_sweep_csv(path)["nc-real"]
    assert np.array_equal(x, [0, 10, 20]) and np.allclose(y, res.curve("nc-real")[1], rtol=1e-11)


def test_scheme_token():
    assert scheme_token(SchemeConfig()) == "basic-real"
    assert scheme_token(SchemeConfig("random-phase", trials=100, name="r100")) == "r100=random-phase[L=100,M=8]"
    assert scheme_token(SchemeConfig("nc-real")) == "nc-real[bmax=2,bstep=0.01]"
    assert scheme_token(SchemeConfig("nc-real", b_grid=(0, 0.5, 2))) == "nc-real[b=0/0.5/2]"


def test_db_gain():
    x = np.array([0.0, 5.0, 10.0, 15.0, 20.0])
    y = np.log2(1 + 10 ** (x / 10))
    assert db_gain((x, y), (x, y), 2.0) == 0.0
    assert db_gain((x, y), (x - 1.0, y), 2.0) == pytest.approx(1.0, abs=1e-12)
    assert db_gain((x, y), (x + 0.5, y), 2.0) == pytest.approx(-0.5, abs=1e-12)
    with pytest.raises(CurveRangeError):
        db_gain((x, y), (x, y), 100.0)
    with pytest.raises(CurveRangeError):
        db_gain((x, y[::-1]), (x, y), 2.0)
    with pytest.raises(CurveRangeError):
        db_gain((x[:1], y[:1]), (x, y), 2.0)
