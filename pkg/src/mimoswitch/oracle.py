"""Symbol-level check of relay designs.

Gaussian symbols go through uplink, relay and downlink with explicit noise;
each station divides by its gain, removes its own echoed symbol and the
result is compared with the analytic effective noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .errors import SizeMismatchError
from .relay import RelayDesign, SystemParams

BATCH = 1 << 16


@dataclass(frozen=True, eq=False)
class SlotTrace:
    num_symbols: int
    signal_power: np.ndarray  # per station
    noise_power: np.ndarray  # noise plus interference, per station
    sinr: np.ndarray
    residual_interference: np.ndarray  # noise-free error power relative to signal
    relay_power: float
    cancel_self: bool = True


def _cn(shape, rng, var=1.0):
    if var == 0.0:
        return np.zeros(shape, dtype=complex)
    z = rng.standard_normal(shape + (2,)) * math.sqrt(var / 2)
    return z[..., 0] + 1j * z[..., 1]


def simulate_slot(
    design: RelayDesign,
    ch: ChannelRealization,
    params: SystemParams | None,
    num_symbols: int,
    rng: np.random.Generator,
    cancel_self: bool = True,
) -> SlotTrace:
    """Push ``num_symbols`` symbols per station through one slot.

    ``params=None`` runs without any noise. Signal power is measured by
    projecting each station's output on its intended symbol; whatever is left
    counts as noise plus interference.
    """
    n = ch.n
    if design.permutation.n != n or design.g.shape != (n, n):
        raise SizeMismatchError(f"design is for {design.permutation.n} stations, channel has {n}")
    if num_symbols < 1:
        raise ValueError("num_symbols must be >= 1")
    sig2 = 0.0 if params is None else params.sigma_sq
    sr2 = 0.0 if params is None else params.sigma_r_sq
    src = np.array(design.permutation.source_of)
    a = np.asarray(design.a, dtype=complex)
    b = np.zeros(n, dtype=complex) if design.b is None else np.asarray(design.b, dtype=complex)
    echo = b if cancel_self else np.zeros(n, dtype=complex)
    end_to_end = ch.h_d @ design.g @ ch.h_u

    # accumulate relative to the intended symbol, e = r_hat - x_src, so the
    # projection below only cancels at the scale of the noise
    cross = np.zeros(n, dtype=complex)  # sum e * conj(x_src)
    err_sq = np.zeros(n)
    x_sq = np.zeros(n)
    clean_err = np.zeros(n)
    relay_sq = 0.0
    done = 0
    while done < num_symbols:
        m = min(BATCH, num_symbols - done)
        x = _cn((n, m), rng)
        u = _cn((n, m), rng, sr2)
        w = _cn((n, m), rng, sig2)
        t = design.g @ (ch.h_u @ x + u)
        relay_sq += float(np.sum(np.abs(t) ** 2))
        r = ch.h_d @ t + w
        r_hat = r / a[:, None] - echo[:, None] * x
        xs = x[src]
        e = r_hat - xs
        cross += np.sum(e * np.conj(xs), axis=1)
        err_sq += np.sum(np.abs(e) ** 2, axis=1)
        x_sq += np.sum(np.abs(xs) ** 2, axis=1)
        clean = (end_to_end @ x) / a[:, None] - echo[:, None] * x
        clean_err += np.sum(np.abs(clean - xs) ** 2, axis=1)
        done += m

    coef = 1.0 + cross / x_sq
    signal = np.abs(coef) ** 2 * x_sq / num_symbols
    noise = np.maximum(err_sq - np.abs(cross) ** 2 / x_sq, 0.0) / num_symbols
    with np.errstate(divide="ignore"):
        sinr = np.where(noise > 0, signal / np.where(noise > 0, noise, 1.0), np.inf)
    return SlotTrace(
        num_symbols=num_symbols,
        signal_power=signal,
        noise_power=noise,
        sinr=sinr,
        residual_interference=clean_err / x_sq,
        relay_power=relay_sq / num_symbols,
        cancel_self=cancel_self,
    )


@dataclass(frozen=True)
class Check:
    name: str  # "sinr", "relay-power" or "fairness"
    station: int | None  # 0-based, None for whole-slot checks
    measured: float
    expected: float
    rel_error: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    tolerance: float
    trace: SlotTrace = field(repr=False)
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            where = "" if c.station is None else f" station={c.station + 1}"
            out.append(
                f"{'PASS' if c.passed else 'FAIL'} {c.name}{where} measured={c.measured:.6g} "
                f"expected={c.expected:.6g} rel_error={c.rel_error:.3g}"
            )
        return out


def verify_design(design, ch, params, num_symbols=10**6, tolerance=0.05, rng=None) -> VerificationReport:
    """Check empirical SINR, relay power and fairness against the design."""
    rng = np.random.default_rng() if rng is None else rng
    tr = simulate_slot(design, ch, params, num_symbols, rng)
    checks = []
    target = 1.0 / design.sigma_e_sq
    for j, s in enumerate(tr.sinr):
        err = abs(s - target) / target
        checks.append(Check("sinr", j, float(s), target, float(err), bool(err <= tolerance)))
    err = abs(tr.relay_power - params.p) / params.p
    checks.append(Check("relay-power", None, tr.relay_power, params.p, float(err), bool(err <= tolerance)))
    mean = float(np.mean(tr.sinr))
    for j, s in enumerate(tr.sinr):
        err = abs(s - mean) / mean
        checks.append(Check("fairness", j, float(s), mean, float(err), bool(err <= tolerance)))
    return VerificationReport(tolerance, tr, tuple(checks))

