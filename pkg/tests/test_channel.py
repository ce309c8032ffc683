import numpy as np
import pytest

from mimoswitch.channel import (
    ChannelRealization,
    draw_channel,
    format_complex,
    load_channel_file,
    parse_complex,
    rayleigh_matrix,
    write_channel_file,
)
from mimoswitch.errors import DegenerateChannelStreamError, ParseError, SingularChannelError


def test_rayleigh_statistics():
    z = rayleigh_matrix(1000, np.random.default_rng(0)).ravel()[:10**5]
    assert abs(z.real.mean()) < 0.02 and abs(z.imag.mean()) < 0.02
    assert abs(np.var(z) - 1.0) < 0.02
    assert abs(np.var(z.real) - 0.5) < 0.01 and abs(np.var(z.imag) - 0.5) < 0.01
    # circular symmetry: real and imaginary parts uncorrelated
    assert abs(np.mean(z.real * z.imag)) < 0.01


def test_reciprocal_draw():
    ch, redraws = draw_channel(4, np.random.default_rng(1))
    assert np.array_equal(ch.h_d, ch.h_u.T) and ch.is_reciprocal
    assert redraws == 0
    ch2, _ = draw_channel(4, np.random.default_rng(1), reciprocal=False)
    assert not ch2.is_reciprocal


def test_redraws_counted():
    rng = np.random.default_rng(2)
    total = 0
    for _ in range(20):
        ch, k = draw_channel(4, rng, condition_bound=8.0)
        assert np.linalg.cond(ch.h_u) <= 8.0
        total += k
    assert total > 0
    with pytest.raises(DegenerateChannelStreamError):
        draw_channel(3, rng, condition_bound=0.5)


def test_draw_deterministic():
    a, _ = draw_channel(5, np.random.default_rng(7))
    b, _ = draw_channel(5, np.random.default_rng(7))
    assert np.array_equal(a.h_u, b.h_u)


def test_inverses_cached():
    ch, _ = draw_channel(4, np.random.default_rng(3))
    assert np.allclose(ch.h_u_inv @ ch.h_u, np.eye(4), atol=1e-12)
    assert np.allclose(ch.h_d @ ch.h_d_inv, np.eye(4), atol=1e-12)
    with pytest.raises(ValueError):
        ch.h_u_inv[0, 0] = 1.0


def test_singular_rejected():
    with pytest.raises(SingularChannelError, match="uplink"):
        ChannelRealization(np.ones((2, 2)), np.eye(2))
    with pytest.raises(SingularChannelError, match="downlink"):
        ChannelRealization(np.eye(2), np.ones((2, 2)))
    with pytest.raises(SingularChannelError):
        ChannelRealization(np.array([[np.nan, 0], [0, 1]]), np.eye(2))


def test_complex_text():
    for z in (1 + 2j, -0.5 - 1e-300j, 3.0, 1e-17 + 0j, complex(1 / 3, -2 / 7)):
        assert parse_complex(format_complex(z)) == z
    assert parse_complex("1-2i") == 1 - 2j
    assert parse_complex("2.5") == 2.5
    assert parse_complex("3j") == 3j
    with pytest.raises(ValueError):
        parse_complex("1+x")


def test_file_round_trip(tmp_path):
    ch, _ = draw_channel(4, np.random.default_rng(4), reciprocal=False)
    path = tmp_path / "ch.txt"
    write_channel_file(path, ch)
    back = load_channel_file(path)
    assert np.array_equal(back.h_u, ch.h_u) and np.array_equal(back.h_d, ch.h_d)
    write_channel_file(path, ch, include_downlink=False)
    back = load_channel_file(path)
    assert np.array_equal(back.h_d, ch.h_u.T)


def test_identity_file(tmp_path):
    path = tmp_path / "id.txt"
    path.write_text("# identity\n1+0i 0+0i\n0 1\n")
    ch = load_channel_file(path)
    assert np.array_equal(ch.h_u, np.eye(2)) and np.array_equal(ch.h_d, np.eye(2))


def test_singular_file(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("1 0\n0 1\n\n1 2\n2 4\n")
    with pytest.raises(SingularChannelError, match="downlink"):
        load_channel_file(path)


def test_malformed_file(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 0\n0 1+zi\n")
    with pytest.raises(ParseError, match="line 2, column 2"):
        load_channel_file(path)
    path.write_text("1 0 0\n0 1\n")
    with pytest.raises(ParseError, match="not square"):
        load_channel_file(path)
    path.write_text("1 0\n0 1\n\n1 0 0\n0 1 0\n0 0 1\n")
    with pytest.raises(ParseError, match="differ"):
        load_channel_file(path)
