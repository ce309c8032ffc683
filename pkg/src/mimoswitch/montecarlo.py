"""Monte Carlo throughput sweeps over Rayleigh channels.

Random streams come from one master seed. Channel ``r`` uses spawn key
``(0, r)``; the phase trials of a scheme use ``(1, r, family, derangement)``
where ``family`` hashes the scheme kind, bin count and zero-trial flag. So adding
schemes never changes the channels, and random-phase runs that differ only in
their trial count share a trial prefix.
"""
from __future__ import annotations

import csv
import io
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import DEFAULT_CONDITION_BOUND, ChannelRealization, draw_channel
from .combinatorics import CondensedSet, Permutation
from .errors import CurveRangeError, MimoSwitchError
from .relay import SchemeConfig, SystemParams, trial_minima

CSV_COLUMNS = ("snr_db", "scheme_or_set", "mean_throughput_bits", "std_err", "realizations", "redraws")


def snr_to_noise(snr_db: float) -> tuple[float, float]:
    """Station and relay noise powers for an SNR in dB (unit station power)."""
    if not math.isfinite(snr_db):
        raise ValueError(f"SNR must be finite, got {snr_db}")
    s = 10.0 ** (-snr_db / 10.0)
    return s, s


def params_for_snr(snr_db: float, p: float = 1.0) -> SystemParams:
    sigma_sq, sigma_r_sq = snr_to_noise(snr_db)
    return SystemParams(p=p, sigma_sq=sigma_sq, sigma_r_sq=sigma_r_sq)


@dataclass(frozen=True)
class SweepConfig:
    """Either ``permutation`` (single-slot rates) or ``condensed_sets`` (fair switching)."""

    n: int = 4
    snr_points_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)
    num_realizations: int = 1000
    schemes: tuple[SchemeConfig, ...] = (SchemeConfig(),)
    permutation: Permutation | None = None
    condensed_sets: tuple[CondensedSet, ...] | None = None
    set_labels: tuple[str, ...] | None = None
    reciprocal: bool = True
    condition_bound: float = DEFAULT_CONDITION_BOUND
    rng_seed: int = 0
    p: float = 1.0
    channel_override: ChannelRealization | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.num_realizations < 1:
            raise ValueError("num_realizations must be >= 1")
        if not self.snr_points_db or not all(math.isfinite(s) for s in self.snr_points_db):
            raise ValueError("SNR points must be finite and non-empty")
        if (self.permutation is None) == (self.condensed_sets is None):
            raise ValueError("give exactly one of permutation or condensed_sets")
        if self.permutation is not None and self.permutation.n != self.n:
            raise ValueError("permutation size does not match n")
        if self.condensed_sets is not None:
            if any(c.n != self.n for c in self.condensed_sets):
                raise ValueError("condensed set size does not match n")
            if self.set_labels is not None and len(self.set_labels) != len(self.condensed_sets):
                raise ValueError("one label per condensed set")
        labels = [s.label for s in self.schemes]
        if not labels or len(set(labels)) != len(labels):
            raise ValueError("schemes must be non-empty with distinct labels")

    @property
    def cell_labels(self) -> list[str]:
        if self.condensed_sets is None:
            return [s.label for s in self.schemes]
        return [f"{s.label}/{q}" for s in self.schemes for q in self._set_labels()]

    def _set_labels(self):
        if self.set_labels is not None:
            return list(self.set_labels)
        return [f"Q{k + 1}" for k in range(len(self.condensed_sets))]

    def describe(self) -> dict:
        """Flat key/value description, enough to rerun the sweep."""
        out = {
            "n": self.n,
            "snr_db": ",".join(f"{s:g}" for s in self.snr_points_db),
            "realizations": self.num_realizations,
            "schemes": " ".join(scheme_token(s) for s in self.schemes),
            "reciprocal": int(self.reciprocal),
            "condition_bound": f"{self.condition_bound:g}",
            "seed": self.rng_seed,
            "p": f"{self.p:g}",
        }
        if self.permutation is not None:
            out["permutation"] = ",".join(str(i) for i in self.permutation.one_based())
        else:
            out["sets"] = ";".join(
                f"{lab}=" + "|".join(",".join(str(i) for i in d.one_based()) for d in cs)
                for lab, cs in zip(self._set_labels(), self.condensed_sets)
            )
        if self.channel_override is not None:
            out["channel"] = "override"
        return out


def scheme_token(s: SchemeConfig) -> str:
    """Compact text form, parsed back by the CLI."""
    opts = []
    if s.randomized:
        opts += [f"L={s.trials}", f"M={s.phase_bins}"]
        if s.zero_phase_trial:
            opts.append("zero=1")
    if s.network_coded:
        g = s.b_grid
        steps = np.diff(g)
        if len(g) > 1 and np.allclose(steps, steps[0]):
            opts += [f"bmax={g[-1]:g}", f"bstep={steps[0]:g}"]
        else:
            opts.append("b=" + "/".join(f"{b:g}" for b in g))
    if s.nonpairwise_fallback:
        opts.append("fallback=1")
    if s.rng_seed is not None:
        opts.append(f"seed={s.rng_seed}")
    tok = s.kind + ("[" + ",".join(opts) + "]" if opts else "")
    if s.name and s.name != s.kind:
        tok = f"{s.name}={tok}"
    return tok


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    label: str
    mean: float
    std_err: float
    realizations: int
    redraws: int
    failures: int = 0


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[SweepRow]
    samples: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def curve(self, label: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.label == label]
        if not rows:
            raise KeyError(label)
        return np.array([r.snr_db for r in rows]), np.array([r.mean for r in rows])

    def to_csv(self, header: dict | None = None) -> str:
        """CSV text; ``header`` entries are added to (or replace) the config lines."""
        buf = io.StringIO()
        buf.write("# mimoswitch sweep\n")
        for k, v in {**self.config.describe(), **(header or {})}.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_g(r.snr_db), r.label, _g(r.mean), _g(r.std_err), r.realizations, r.redraws])
        failed = [r for r in self.rows if r.failures]
        for r in failed:
            buf.write(f"# failures snr_db={_g(r.snr_db)} cell={r.label} count={r.failures}\n")
        return buf.getvalue()

    def write_csv(self, path, header: dict | None = None):
        Path(path).write_text(self.to_csv(header))


def _g(x: float) -> str:
    return f"{x:.12g}"


def _family(scheme: SchemeConfig) -> int:
    return zlib.crc32(f"{scheme.kind}/{scheme.phase_bins}/{int(scheme.zero_phase_trial)}".encode())


def _perm_code(p: Permutation) -> int:
    code = 0
    for i in p.source_of:
        code = code * p.n + i
    return code


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def channel_stream(seed: int, realization: int) -> np.random.Generator:
    """Stream that draws the channel of one realization."""
    return _stream(seed, 0, realization)


def phase_stream(seed: int, realization: int, scheme: SchemeConfig, perm: Permutation) -> np.random.Generator:
    """Stream for the phase trials of ``scheme`` on ``perm`` in one realization."""
    return _stream(seed, 1, realization, _family(scheme), _perm_code(perm))


def _realization_block(cfg: SweepConfig, start: int, stop: int):
    """Throughput samples for realizations ``start..stop-1``: {label: (R, S)}, redraws."""
    params = [params_for_snr(s, cfg.p) for s in cfg.snr_points_db]
    n_snr = len(params)
    if cfg.permutation is not None:
        ders = [cfg.permutation]
    else:
        uniq = {d.source_of: d for cs in cfg.condensed_sets for d in cs}
        ders = [uniq[k] for k in sorted(uniq)]
    count = stop - start
    out = {lab: np.full((count, n_snr), np.nan) for lab in cfg.cell_labels}
    redraws = 0
    set_labels = cfg._set_labels() if cfg.condensed_sets is not None else None

    # schemes differing only in trial count share one computation
    groups: dict[tuple, list[SchemeConfig]] = {}
    for scheme in cfg.schemes:
        key = (_family(scheme), scheme.kind, scheme.b_grid, scheme.nonpairwise_fallback)
        groups.setdefault(key, []).append(scheme)

    for row, r in enumerate(range(start, stop)):
        if cfg.channel_override is not None:
            ch = cfg.channel_override
        else:
            ch, extra = draw_channel(cfg.n, channel_stream(cfg.rng_seed, r), cfg.reciprocal, cfg.condition_bound)
            redraws += extra
        rate: dict[str, dict] = {s.label: {} for s in cfg.schemes}
        for members in groups.values():
            widest = max(members, key=lambda s: s.trials)
            for d in ders:
                rng = phase_stream(cfg.rng_seed, r, widest, d)
                try:
                    per_trial = trial_minima(ch, d, params, widest, rng)
                except MimoSwitchError:
                    continue
                for scheme in members:
                    take = scheme.trials if scheme.randomized else per_trial.shape[0]
                    s = per_trial[:take].min(axis=0)
                    rate[scheme.label][d.source_of] = np.log2(1.0 + 1.0 / s)
        for scheme in cfg.schemes:
            got = rate[scheme.label]
            if set_labels is None:
                if cfg.permutation.source_of in got:
                    out[scheme.label][row] = got[cfg.permutation.source_of]
                continue
            for lab, cs in zip(set_labels, cfg.condensed_sets):
                if all(d.source_of in got for d in cs):
                    rates = np.array([got[d.source_of] for d in cs])
                    out[f"{scheme.label}/{lab}"][row] = rates.shape[0] / np.sum(1.0 / rates, axis=0)
    return out, redraws


def run_sweep(cfg: SweepConfig, workers: int = 1, chunk: int = 250) -> SweepResult:
    """Average throughput per SNR point and cell; deterministic for a given seed.

    Realizations are split into chunks (optionally evaluated in ``workers``
    processes) and reassembled in index order, so the result does not depend
    on the execution schedule.
    """
    bounds = [(a, min(a + chunk, cfg.num_realizations)) for a in range(0, cfg.num_realizations, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_realization_block, [cfg] * len(bounds), *zip(*bounds)))
    else:
        parts = [_realization_block(cfg, a, b) for a, b in bounds]

    redraws = sum(p[1] for p in parts)
    samples = {lab: np.concatenate([p[0][lab] for p in parts]) for lab in cfg.cell_labels}
    rows = []
    for si, snr in enumerate(cfg.snr_points_db):
        for lab in cfg.cell_labels:
            col = samples[lab][:, si]
            ok = col[np.isfinite(col)]
            k = ok.size
            mean = float(ok.mean()) if k else float("nan")
            se = float(ok.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
            rows.append(SweepRow(float(snr), lab, mean, se, k, redraws, col.size - k))
    return SweepResult(cfg, rows, samples)


def db_gain(curve_a: Sequence, curve_b: Sequence, reference_throughput: float) -> float:
    """How many dB less SNR curve ``b`` needs than curve ``a`` to reach a throughput.

    Curves are ``(snr_db, throughput)`` pairs, strictly increasing in throughput;
    both are inverted by piecewise-linear interpolation. Positive means ``b``
    is better.
    """
    snr_a = _invert(curve_a, reference_throughput, "first")
    snr_b = _invert(curve_b, reference_throughput, "second")
    return snr_a - snr_b


def _invert(curve, level, which):
    x, y = (np.asarray(c, dtype=float) for c in curve)
    if x.shape != y.shape or x.size < 2:
        raise CurveRangeError(f"{which} curve needs at least two (snr, throughput) points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if not np.all(np.diff(y) > 0):
        raise CurveRangeError(f"{which} curve is not increasing in SNR")
    if not y[0] <= level <= y[-1]:
        raise CurveRangeError(f"reference {level:.6g} outside {which} curve range [{y[0]:.6g}, {y[-1]:.6g}]")
    return float(np.interp(level, y, x))


def read_sweep_csv(path_or_text) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """``{label: (snr_db, mean_throughput)}`` from a sweep CSV."""
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    curves: dict[str, list] = {}
    for rec in csv.DictReader(lines):
        curves.setdefault(rec["scheme_or_set"], []).append(
            (float(rec["snr_db"]), float(rec["mean_throughput_bits"]))
        )
    return {k: (np.array([a for a, _ in v]), np.array([b for _, b in v])) for k, v in curves.items()}
