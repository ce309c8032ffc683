"""Relay beamforming design for one switch matrix.

The relay matrix is ``G = H_d^-1 A (P + B) H_u^-1``: zero forcing towards the
switch pattern ``P`` plus an optional self-echo diagonal ``B`` that the
stations cancel (network coding). The per-station gains ``A`` are sized so that
every station sees the same effective noise ``sigma_e^2`` after dividing by
``a_j``, and ``sigma_e^2`` is chosen so the relay transmits exactly ``p``.

Station ``j`` after gain division and self-echo removal sees

    x_{i_j} + [(P + B) H_u^-1 u]_j + w_j / a_j

so its effective noise is ``sigma_r^2 ||h_{i_j} + b_j h_j||^2 + sigma^2/|a_j|^2``
where ``h_k`` is row ``k`` of ``H_u^-1``. With ``B = 0`` this is the plain ZF
expression.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _rootfind
from .channel import ChannelRealization
from .combinatorics import Permutation, is_pairwise
from .errors import (
    DomainError,
    InfeasiblePowerError,
    SchemeMismatchError,
    SingularChannelError,
    SizeMismatchError,
)

BASIC = "basic-real"
COUNTER_PHASE = "counter-phase"
RANDOM_PHASE = "random-phase"
NC_REAL = "nc-real"
NC_RANDOM_PHASE = "nc-random-phase"
SCHEME_KINDS = (BASIC, COUNTER_PHASE, RANDOM_PHASE, NC_REAL, NC_RANDOM_PHASE)

DEFAULT_B_GRID = tuple(round(0.01 * k, 2) for k in range(201))


@dataclass(frozen=True)
class SystemParams:
    p: float = 1.0
    sigma_sq: float = 0.1
    sigma_r_sq: float = 0.1

    def __post_init__(self):
        for name in ("p", "sigma_sq", "sigma_r_sq"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class SchemeConfig:
    """How the phases of A and the self-echo B are chosen.

    ``trials`` and ``phase_bins`` apply to the random-phase kinds, ``b_grid`` to
    the network-coded kinds. With ``zero_phase_trial`` the first trial is the
    all-zero assignment, which makes a random-phase kind never worse than its
    real counterpart.
    """

    kind: str = BASIC
    phase_bins: int = 8
    trials: int = 10
    b_grid: tuple[float, ...] = DEFAULT_B_GRID
    rng_seed: int | None = None
    zero_phase_trial: bool = False
    nonpairwise_fallback: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; expected one of {', '.join(SCHEME_KINDS)}")
        if self.phase_bins < 1 or self.trials < 1:
            raise ValueError("phase_bins and trials must be >= 1")
        grid = tuple(float(b) for b in self.b_grid)
        if any(b < 0 or not math.isfinite(b) for b in grid) or 0.0 not in grid:
            raise ValueError("b_grid must hold finite non-negative values including 0")
        object.__setattr__(self, "b_grid", tuple(sorted(set(grid))))

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def network_coded(self) -> bool:
        return self.kind in (NC_REAL, NC_RANDOM_PHASE)

    @property
    def randomized(self) -> bool:
        return self.kind in (RANDOM_PHASE, NC_RANDOM_PHASE)


@dataclass(frozen=True, eq=False)
class RelayDesign:
    permutation: Permutation
    a: np.ndarray
    b: np.ndarray
    sigma_e_sq: float
    g: np.ndarray
    achieved_power: float
    scheme: str = BASIC
    trial: int = 0
    b_scalar: float = 0.0
    phases_a: np.ndarray = field(default=None, repr=False)
    phases_b: np.ndarray = field(default=None, repr=False)

    @property
    def rate(self) -> float:
        return effective_rate(self.sigma_e_sq)


def effective_rate(sigma_e_sq: float) -> float:
    """Shannon rate in bits per channel use at per-station SNR ``1/sigma_e_sq``."""
    if not sigma_e_sq > 0:
        raise DomainError(f"sigma_e_sq must be > 0, got {sigma_e_sq}")
    return math.log2(1.0 + 1.0 / sigma_e_sq)


def _check_sizes(ch: ChannelRealization, perm: Permutation):
    if ch.n != perm.n:
        raise SizeMismatchError(f"channel has {ch.n} stations, permutation has {perm.n}")


def _b_vector(n, b_scalar, phases_b=None):
    if phases_b is None:
        return np.full(n, complex(b_scalar))
    return b_scalar * np.exp(1j * np.asarray(phases_b, dtype=float))


def _phase_vector(n, phases):
    if phases is None:
        return np.zeros(n)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (n,):
        raise SizeMismatchError(f"expected {n} phases, got shape {phases.shape}")
    return phases


def zf_noise_terms(ch: ChannelRealization, perm: Permutation, params: SystemParams) -> np.ndarray:
    """Relay-noise contribution ``sigma_r^2 ||row i_j of H_u^-1||^2`` per station."""
    _check_sizes(ch, perm)
    rows = ch.h_u_inv[list(perm.source_of)]
    return params.sigma_r_sq * np.sum(np.abs(rows) ** 2, axis=1)


def effective_noise_terms(ch, perm, params, b=None) -> np.ndarray:
    """Relay-noise contribution per station with self-echo ``b`` (complex vector)."""
    _check_sizes(ch, perm)
    m = perm.matrix().astype(complex)
    if b is not None:
        m = m + np.diag(np.asarray(b, dtype=complex))
    return params.sigma_r_sq * np.sum(np.abs(m @ ch.h_u_inv) ** 2, axis=1)


def station_noise(ch, perm, params, a, b=None) -> np.ndarray:
    """Effective noise each station sees after dividing by its gain."""
    return effective_noise_terms(ch, perm, params, b) + params.sigma_sq / np.abs(np.asarray(a)) ** 2


def transfer_matrix(perm: Permutation, a, b=None) -> np.ndarray:
    """``A (P + B)``, the end-to-end matrix the relay must realize."""
    m = perm.matrix().astype(complex)
    if b is not None:
        m = m + np.diag(np.asarray(b, dtype=complex))
    return np.asarray(a, dtype=complex)[:, None] * m


def relay_power(ch, perm, params, a, b=None) -> float:
    """Relay transmit power of the design ``(a, b)`` without forming G."""
    t = ch.h_d_inv @ transfer_matrix(perm, a, b)
    return float(np.sum(np.abs(t) ** 2) + params.sigma_r_sq * np.sum(np.abs(t @ ch.h_u_inv) ** 2))


def beamformer_power(g, ch, params) -> float:
    """``Tr[H_u^H G^H G H_u] + sigma_r^2 Tr[G^H G]``."""
    return float(np.sum(np.abs(g @ ch.h_u) ** 2) + params.sigma_r_sq * np.sum(np.abs(g) ** 2))


def assemble(ch, perm, b_values, phases_a, phases_b=None):
    """Quadratic-form coefficients for every (trial, b) candidate.

    ``phases_a``/``phases_b`` are (T, N); ``b_values`` is (B,). Returns
    ``q0, q1`` of shape (T, B, N, N) and ``nu`` of shape (T, B, N) such that at
    relay noise ``sr2`` the power form is ``q0 + sr2 * q1`` and the relay noise
    terms are ``sr2 * nu``.
    """
    _check_sizes(ch, perm)
    n = ch.n
    phases_a = np.atleast_2d(np.asarray(phases_a, dtype=float))
    t = phases_a.shape[0]
    b_values = np.asarray(b_values, dtype=float)
    if phases_b is None:
        phases_b = np.zeros((t, n))
    phases_b = np.broadcast_to(np.atleast_2d(np.asarray(phases_b, dtype=float)), (t, n))

    h_inv = ch.h_u_inv
    d = ch.h_d_inv
    gram_d = d.conj().T @ d  # [l, j] = d_l^H d_j over columns of H_d^-1

    bv = b_values[None, :, None] * np.exp(1j * phases_b)[:, None, :]  # (T, B, N)
    rows = np.broadcast_to(perm.matrix().astype(complex), bv.shape + (n,)).copy()
    idx = np.arange(n)
    rows[..., idx, idx] += bv
    v = rows @ h_inv
    gram_m = np.conj(rows) @ np.swapaxes(rows, -1, -2)
    gram_v = np.conj(v) @ np.swapaxes(v, -1, -2)

    rot = np.exp(1j * phases_a)[:, None, :]  # (T, 1, N)
    outer = np.conj(rot)[..., :, None] * rot[..., None, :]
    q0 = (outer * gram_d * gram_m).real
    q1 = (outer * gram_d * gram_v).real
    nu = np.sum(np.abs(v) ** 2, axis=-1)
    return q0, q1, nu


_STATUS_ERRORS = {
    _rootfind.INFEASIBLE: (InfeasiblePowerError, "no sign change of the power equation within the expansion budget"),
    _rootfind.NONFINITE: (SingularChannelError, "power equation evaluated to a non-finite value"),
}


def solve_assembled(q0, q1, nu, params_seq: Sequence[SystemParams]):
    """Solve every candidate at every parameter set; returns (..., S) roots and status."""
    lead = q0.shape[:-2]
    n = q0.shape[-1]
    sig2 = np.array([pp.sigma_sq for pp in params_seq], dtype=float)
    sr2 = np.array([pp.sigma_r_sq for pp in params_seq], dtype=float)
    pw = np.array([pp.p for pp in params_seq], dtype=float)
    roots, status = _rootfind.solve_grid(
        np.ascontiguousarray(q0.reshape(-1, n, n)),
        np.ascontiguousarray(q1.reshape(-1, n, n)),
        np.ascontiguousarray(nu.reshape(-1, n)),
        sig2,
        sr2,
        pw,
    )
    return roots.reshape(lead + (len(sig2),)), status.reshape(lead + (len(sig2),))


def _raise_status(status):
    bad = status[status != _rootfind.OK]
    if bad.size:
        exc, msg = _STATUS_ERRORS[int(bad.flat[0])]
        raise exc(msg)


def noise_floor(ch, perm, params, phases_b=None, b_scalar=0.0) -> float:
    """Supremum of the excluded region: ``max_j`` of the relay-noise terms."""
    b = None if b_scalar == 0 else _b_vector(ch.n, b_scalar, phases_b)
    return float(np.max(effective_noise_terms(ch, perm, params, b)))


def solve_sigma_e(ch, perm, params, phases_a=None, b_scalar=0.0, phases_b=None) -> float:
    """Smallest effective noise at which the relay transmits exactly ``p``."""
    if b_scalar < 0:
        raise DomainError("b_scalar must be non-negative")
    pa = _phase_vector(ch.n, phases_a)
    pb = None if phases_b is None else _phase_vector(ch.n, phases_b)
    q0, q1, nu = assemble(ch, perm, [b_scalar], pa[None], None if pb is None else pb[None])
    roots, status = solve_assembled(q0, q1, nu, [params])
    _raise_status(status)
    return float(roots.flat[0])


def compute_gains(ch, perm, params, sigma_e_sq, phases_a=None, b_scalar=0.0, phases_b=None):
    """Gains ``a`` (complex, magnitudes equalizing station noise) and self-echo ``b``."""
    pa = _phase_vector(ch.n, phases_a)
    b = _b_vector(ch.n, b_scalar, phases_b)
    floor = effective_noise_terms(ch, perm, params, b)
    margin = sigma_e_sq - floor
    if not np.all(margin > 0):
        raise DomainError(f"sigma_e_sq={sigma_e_sq:.6g} is not above the relay-noise floor {floor.max():.6g}")
    mag = np.sqrt(params.sigma_sq / margin)
    return mag * np.exp(1j * pa), b


def build_beamformer(ch, perm, a, b=None) -> np.ndarray:
    _check_sizes(ch, perm)
    g = ch.h_d_inv @ transfer_matrix(perm, a, b) @ ch.h_u_inv
    if not np.isfinite(g).all():
        raise SingularChannelError("beamformer has non-finite entries")
    return g


def counter_phases(perm: Permutation, fallback: bool = False) -> np.ndarray:
    """0 / pi along each exchange; alternating along longer cycles with ``fallback``."""
    if not is_pairwise(perm) and not fallback:
        raise SchemeMismatchError(f"counter-phase needs a pairwise permutation, got {perm}")
    phases = np.zeros(perm.n)
    for cyc in perm.cycles():
        for pos, station in enumerate(cyc):
            phases[station] = math.pi * (pos % 2)
    return phases


def random_phases(n, trials, bins, rng, zero_first=False):
    """Binned uniform phases for A and B, shape (trials, n) each.

    Row ``t`` depends only on the stream prefix, so a run with more trials
    extends a run with fewer.
    """
    u = rng.random((trials, 2 * n))
    ph = 2.0 * math.pi * np.floor(u * bins) / bins
    if zero_first:
        ph[0] = 0.0
    return ph[:, :n], ph[:, n:]


def _rng_for(scheme, rng):
    if rng is not None:
        return rng
    return np.random.default_rng(scheme.rng_seed)


def candidates(perm: Permutation, scheme: SchemeConfig, rng=None):
    """(phases_a (T,N), phases_b (T,N) or None, b_values) searched by a scheme."""
    n = perm.n
    zeros = np.zeros((1, n))
    if scheme.kind == BASIC:
        return zeros, None, np.zeros(1)
    if scheme.kind == COUNTER_PHASE:
        return counter_phases(perm, scheme.nonpairwise_fallback)[None], None, np.zeros(1)
    if scheme.kind == NC_REAL:
        return zeros, None, np.array(scheme.b_grid)
    pa, pb = random_phases(n, scheme.trials, scheme.phase_bins, _rng_for(scheme, rng), scheme.zero_phase_trial)
    if scheme.kind == RANDOM_PHASE:
        return pa, None, np.zeros(1)
    return pa, pb, np.array(scheme.b_grid)


def design(ch, perm, params, scheme: SchemeConfig = SchemeConfig(), rng=None) -> RelayDesign:
    """Solve the relay for one switch matrix under ``scheme``.

    Candidates are scanned trial by trial and, within a trial, by increasing
    ``b``; the first candidate with the smallest effective noise wins.
    """
    _check_sizes(ch, perm)
    pa, pb, bvals = candidates(perm, scheme, rng)
    q0, q1, nu = assemble(ch, perm, bvals, pa, pb)
    roots, status = solve_assembled(q0, q1, nu, [params])
    _raise_status(status)
    roots = roots[..., 0]
    t, k = np.unravel_index(int(np.argmin(roots)), roots.shape)
    sigma_e_sq = float(roots[t, k])
    phases_b = None if pb is None else pb[t]
    a, b = compute_gains(ch, perm, params, sigma_e_sq, pa[t], float(bvals[k]), phases_b)
    if float(bvals[k]) == 0.0:
        b = np.zeros(ch.n, dtype=complex)
    g = build_beamformer(ch, perm, a, b)
    return RelayDesign(
        permutation=perm,
        a=a,
        b=b,
        sigma_e_sq=sigma_e_sq,
        g=g,
        achieved_power=beamformer_power(g, ch, params),
        scheme=scheme.label,
        trial=int(t),
        b_scalar=float(bvals[k]),
        phases_a=pa[t].copy(),
        phases_b=None if phases_b is None else phases_b.copy(),
    )


def trial_minima(ch, perm, params_seq, scheme: SchemeConfig, rng=None) -> np.ndarray:
    """Best effective noise of each trial (minimized over ``b``), shape (T, S).

    The same candidate phases are used at every parameter set, so a scheme's
    result at parameter set ``s`` is ``trial_minima(...)[:, s].min()``.
    """
    pa, pb, bvals = candidates(perm, scheme, rng)
    q0, q1, nu = assemble(ch, perm, bvals, pa, pb)
    roots, status = solve_assembled(q0, q1, nu, params_seq)
    _raise_status(status)
    return roots.min(axis=1)


def min_sigma_e(ch, perm, params_seq, scheme: SchemeConfig, rng=None) -> np.ndarray:
    """Best effective noise of ``scheme`` at each parameter set, without forming G."""
    return trial_minima(ch, perm, params_seq, scheme, rng).min(axis=0)


def design_residuals(d: RelayDesign, ch: ChannelRealization, params: SystemParams) -> dict:
    """Relative errors of the three design invariants."""
    target = transfer_matrix(d.permutation, d.a, d.b)
    recon = np.linalg.norm(ch.h_d @ d.g @ ch.h_u - target) / np.linalg.norm(target)
    power = abs(beamformer_power(d.g, ch, params) - params.p) / params.p
    noise = station_noise(ch, d.permutation, params, d.a, d.b)
    fairness = float(np.max(np.abs(noise - d.sigma_e_sq)) / d.sigma_e_sq)
    return {"reconstruction": float(recon), "power": float(power), "fairness": fairness}
