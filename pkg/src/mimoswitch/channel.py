"""Channel realizations: Rayleigh draws and the plain-text matrix format."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateChannelStreamError, ParseError, SingularChannelError

DEFAULT_CONDITION_BOUND = 1e6
REDRAW_BUDGET = 1000


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h_u: np.ndarray
    h_d: np.ndarray
    condition_bound: float = DEFAULT_CONDITION_BOUND
    h_u_inv: np.ndarray = field(init=False, repr=False)
    h_d_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h_u = np.array(self.h_u, dtype=complex)
        h_d = np.array(self.h_d, dtype=complex)
        if h_u.ndim != 2 or h_u.shape[0] != h_u.shape[1] or h_u.shape != h_d.shape:
            raise ValueError("uplink and downlink must be square matrices of equal size")
        for name, m in (("uplink", h_u), ("downlink", h_d)):
            if not np.isfinite(m).all():
                raise SingularChannelError(f"{name} matrix has non-finite entries")
            cond = np.linalg.cond(m)
            if not cond <= self.condition_bound:
                raise SingularChannelError(
                    f"{name} matrix is not invertible within condition bound "
                    f"{self.condition_bound:g} (cond={cond:.3g})"
                )
        for arr in (h_u, h_d):
            arr.setflags(write=False)
        h_u_inv = np.linalg.inv(h_u)
        h_d_inv = np.linalg.inv(h_d)
        h_u_inv.setflags(write=False)
        h_d_inv.setflags(write=False)
        object.__setattr__(self, "h_u", h_u)
        object.__setattr__(self, "h_d", h_d)
        object.__setattr__(self, "h_u_inv", h_u_inv)
        object.__setattr__(self, "h_d_inv", h_d_inv)

    @classmethod
    def reciprocal(cls, h_u, condition_bound=DEFAULT_CONDITION_BOUND):
        h_u = np.asarray(h_u, dtype=complex)
        return cls(h_u, h_u.T, condition_bound)

    @classmethod
    def identity(cls, n):
        return cls.reciprocal(np.eye(n))

    @property
    def n(self) -> int:
        return self.h_u.shape[0]

    @property
    def is_reciprocal(self) -> bool:
        return bool(np.array_equal(self.h_d, self.h_u.T))


def rayleigh_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) entries: real and imaginary parts each have variance 1/2."""
    z = rng.standard_normal((n, n, 2)) * math.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


def draw_channel(
    n: int,
    rng: np.random.Generator,
    reciprocal: bool = True,
    condition_bound: float = DEFAULT_CONDITION_BOUND,
) -> tuple[ChannelRealization, int]:
    """Draw a Rayleigh channel; returns it with the number of rejected draws."""
    if n < 2:
        raise ValueError(f"need at least 2 stations, got {n}")
    for redraws in range(REDRAW_BUDGET + 1):
        h_u = rayleigh_matrix(n, rng)
        h_d = h_u.T if reciprocal else rayleigh_matrix(n, rng)
        if np.linalg.cond(h_u) <= condition_bound and np.linalg.cond(h_d) <= condition_bound:
            return ChannelRealization(h_u, h_d, condition_bound), redraws
    raise DegenerateChannelStreamError(
        f"{REDRAW_BUDGET} consecutive draws exceeded condition bound {condition_bound:g}"
    )


# --- text format -----------------------------------------------------------
# One matrix row per line, entries "a+bi" separated by whitespace. The uplink
# block comes first; an optional downlink block follows after a blank line.

def format_complex(z: complex) -> str:
    re_part = repr(float(z.real))
    im = float(z.imag)
    im_part = repr(im)
    if not im_part.startswith("-"):
        im_part = "+" + im_part
    return f"{re_part}{im_part}i"


def parse_complex(text: str) -> complex:
    t = text.strip()
    if t.endswith(("i", "j")):
        try:
            return complex(t[:-1] + "j")
        except ValueError:
            pass
    else:
        try:
            return complex(float(t), 0.0)
        except ValueError:
            pass
    raise ValueError(f"malformed complex entry {text!r}")


def format_matrix(m: np.ndarray) -> str:
    return "\n".join(" ".join(format_complex(z) for z in row) for row in m)


def write_channel_file(path, ch: ChannelRealization, include_downlink: bool = True):
    text = format_matrix(ch.h_u) + "\n"
    if include_downlink:
        text += "\n" + format_matrix(ch.h_d) + "\n"
    Path(path).write_text(text)


def _parse_blocks(text: str):
    blocks: list[list[tuple[int, list[str]]]] = [[]]
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            if blocks[-1]:
                blocks.append([])
            continue
        blocks[-1].append((lineno, line.split()))
    return [b for b in blocks if b]


def load_channel_file(path, condition_bound: float = DEFAULT_CONDITION_BOUND) -> ChannelRealization:
    blocks = _parse_blocks(Path(path).read_text())
    if not blocks or len(blocks) > 2:
        raise ParseError(f"{path}: expected an uplink block and an optional downlink block, found {len(blocks)}")
    names = ("uplink", "downlink")
    mats = []
    for name, block in zip(names, blocks):
        rows = []
        for lineno, fields in block:
            row = []
            for col, tok in enumerate(fields, start=1):
                try:
                    row.append(parse_complex(tok))
                except ValueError:
                    raise ParseError(f"{path}: line {lineno}, column {col}: malformed entry {tok!r}") from None
            rows.append(row)
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ParseError(f"{path}: {name} block is not square")
        m = np.array(rows, dtype=complex)
        if np.linalg.matrix_rank(m) < n or not np.linalg.cond(m) <= condition_bound:
            raise SingularChannelError(f"{path}: {name} block is not invertible")
        mats.append(m)
    h_u = mats[0]
    h_d = mats[1] if len(mats) == 2 else h_u.T
    if h_d.shape != h_u.shape:
        raise ParseError(f"{path}: uplink and downlink blocks differ in size")
    return ChannelRealization(h_u, h_d, condition_bound)
