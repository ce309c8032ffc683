"""Command-line entry point: ``mimoswitch <subcommand> ...``.

Every output starts with ``#`` header lines holding the full configuration and
seed. Errors are one line on stderr: ``error kind=<kind> msg="<text>"``. Exit
status is 0 on success, 1 for usage and input-format problems and 2 for domain
errors (infeasible power, singular channel, infeasible demand, ...).
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from .channel import DEFAULT_CONDITION_BOUND, draw_channel, format_complex, load_channel_file
from .combinatorics import (
    CondensedSet,
    Derangement,
    Permutation,
    enumerate_condensed_sets,
    enumerate_derangements,
    is_pairwise,
    subfactorial,
)
from .errors import InvalidSizeError, MimoSwitchError, ParseError
from .montecarlo import (
    SweepConfig,
    channel_stream,
    db_gain,
    params_for_snr,
    phase_stream,
    read_sweep_csv,
    run_sweep,
    scheme_token,
)
from .oracle import verify_design
from .relay import SCHEME_KINDS, SchemeConfig, SystemParams, design, design_residuals
from .scheduling import compile_schedule, load_demand

SEED_ENV = "MIMOSWITCH_SEED"


class UsageError(Exception):
    kind = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- value parsers -----------------------------------------------------------

def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in re.split(r"[,\s]+", text.strip()) if x]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def parse_permutation(text: str) -> Permutation:
    """1-based ``source_of`` list, e.g. ``4,3,2,1``."""
    try:
        return Permutation.from_one_based(parse_int_list(text))
    except ValueError as e:
        raise UsageError(f"bad permutation {text!r}: {e}") from None


def parse_snr_list(text: str) -> tuple[float, ...]:
    """``0,5,10`` or an inclusive range ``start:step:stop``."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            k = int(np.floor((stop - start) / step + 1e-9))
            return tuple(round(start + i * step, 10) for i in range(k + 1))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad SNR list {text!r}; use 'a,b,c' or 'start:step:stop'") from None


_TOKEN = re.compile(r"^(?:(?P<name>[^=\[\]\s]+)=)?(?P<kind>[a-z-]+)(?:\[(?P<opts>[^\]]*)\])?$")


def parse_scheme_token(token: str) -> SchemeConfig:
    """Inverse of ``scheme_token``: ``[name=]kind[key=value,...]``."""
    m = _TOKEN.match(token.strip())
    if not m:
        raise UsageError(f"bad scheme token {token!r}")
    kind = m["kind"]
    if kind not in SCHEME_KINDS:
        raise UsageError(f"unknown scheme {kind!r}; expected one of {', '.join(SCHEME_KINDS)}")
    kw: dict = {"kind": kind, "name": m["name"]}
    bmax = bstep = None
    for opt in filter(None, (m["opts"] or "").split(",")):
        key, sep, val = opt.partition("=")
        try:
            if not sep:
                raise ValueError
            if key == "L":
                kw["trials"] = int(val)
            elif key == "M":
                kw["phase_bins"] = int(val)
            elif key == "zero":
                kw["zero_phase_trial"] = bool(int(val))
            elif key == "fallback":
                kw["nonpairwise_fallback"] = bool(int(val))
            elif key == "seed":
                kw["rng_seed"] = int(val)
            elif key == "bmax":
                bmax = float(val)
            elif key == "bstep":
                bstep = float(val)
            elif key == "b":
                kw["b_grid"] = tuple(float(b) for b in val.split("/"))
            else:
                raise UsageError(f"unknown option {key!r} in scheme token {token!r}")
        except ValueError:
            raise UsageError(f"bad value in scheme option {opt!r}") from None
    if bmax is not None or bstep is not None:
        bmax = 2.0 if bmax is None else bmax
        bstep = 0.01 if bstep is None else bstep
        if not (bstep > 0 and bmax >= 0):
            raise UsageError("bstep must be > 0 and bmax >= 0")
        kw["b_grid"] = tuple(round(k * bstep, 10) for k in range(int(round(bmax / bstep)) + 1))
    try:
        return SchemeConfig(**kw)
    except ValueError as e:
        raise UsageError(f"scheme {token!r}: {e}") from None


def parse_sets(text: str, n: int, seed: int):
    """Condensed-set selection: ``all``, ``sample:K`` or ``Q1=a,b,..|..;Q2=...``.

    Returns (sets, labels). Labels of enumerated sets are ``Q<index>`` with
    1-based positions in the enumeration order.
    """
    text = text.strip()
    if text == "all" or text.startswith("sample:"):
        every = enumerate_condensed_sets(n)
        idx = list(range(len(every)))
        if text != "all":
            try:
                k = int(text.split(":", 1)[1])
            except ValueError:
                raise UsageError(f"bad set sample {text!r}") from None
            if not 1 <= k <= len(every):
                raise UsageError(f"sample size must be in 1..{len(every)}")
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
            idx = sorted(rng.choice(len(every), size=k, replace=False).tolist())
        return tuple(every[i] for i in idx), tuple(f"Q{i + 1}" for i in idx)
    sets, labels = [], []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        label, sep, body = part.partition("=")
        if not sep:
            raise UsageError(f"set {part!r} needs a label, e.g. Q1=2,1,4,3|...")
        try:
            members = tuple(Derangement(parse_permutation(m).source_of) for m in body.split("|"))
            sets.append(CondensedSet(members))
        except ValueError as e:
            raise UsageError(f"set {label!r}: {e}") from None
        labels.append(label.strip())
    if not sets:
        raise UsageError("no condensed sets given")
    return tuple(sets), tuple(labels)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _header(command: str, cfg: dict) -> str:
    lines = [f"# mimoswitch {command}"]
    lines += [f"# {k}={v}" for k, v in cfg.items()]
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _matrix_text(p: Permutation) -> str:
    return "/".join("".join(str(v) for v in row) for row in p.matrix())


def _csv_perm(p: Permutation) -> str:
    return " ".join(str(i) for i in p.one_based())


# --- subcommands ---------------------------------------------------------------

def cmd_enumerate(args) -> int:
    kind = "condensed" if args.condensed else "derangements"
    cfg = {"kind": kind, "n": args.n, "format": args.format}
    if args.derangements:
        items = enumerate_derangements(args.n)
        cfg["subfactorial"] = subfactorial(args.n)
    else:
        items = enumerate_condensed_sets(args.n)
    cfg["count"] = len(items)
    text = _header("enumerate", cfg)
    if args.count_only:
        _emit(text + f"{len(items)}\n", args.out)
        return 0
    rows = []
    if args.derangements:
        if args.format == "csv":
            rows.append("index,source_of,matrix,pairwise")
            rows += [f"{k},{_csv_perm(d)},{_matrix_text(d)},{int(is_pairwise(d))}" for k, d in enumerate(items, 1)]
        else:
            rows += [f"{k} {d} {_matrix_text(d)}{' pairwise' if is_pairwise(d) else ''}" for k, d in enumerate(items, 1)]
    else:
        if args.format == "csv":
            rows.append("set,source_of,matrix")
            rows += [f"Q{k},{';'.join(_csv_perm(d) for d in cs)},{';'.join(_matrix_text(d) for d in cs)}"
                     for k, cs in enumerate(items, 1)]
        else:
            rows += [f"Q{k} " + " ".join(f"{d} {_matrix_text(d)}" for d in cs) for k, cs in enumerate(items, 1)]
    _emit(text + "\n".join(rows) + "\n", args.out)
    return 0


def _system_params(args) -> tuple[SystemParams, dict]:
    if args.sigma_sq is not None or args.sigma_r_sq is not None:
        if args.sigma_sq is None or args.sigma_r_sq is None:
            raise UsageError("give both --sigma-sq and --sigma-r-sq")
        params = SystemParams(args.p, args.sigma_sq, args.sigma_r_sq)
        return params, {"p": f"{args.p:g}", "sigma_sq": f"{args.sigma_sq:g}", "sigma_r_sq": f"{args.sigma_r_sq:g}"}
    return params_for_snr(args.snr_db, args.p), {"p": f"{args.p:g}", "snr_db": f"{args.snr_db:g}"}


def _channel_and_perm(args, seed):
    if args.channel:
        ch = load_channel_file(args.channel, args.condition_bound)
        redraws = 0
    else:
        if args.n is None:
            raise UsageError("give -n or --channel")
        ch, redraws = draw_channel(args.n, channel_stream(seed, 0), not args.nonreciprocal, args.condition_bound)
    if args.n is not None and args.n != ch.n:
        raise UsageError(f"-n {args.n} does not match the {ch.n}-station channel file")
    perm = parse_permutation(args.perm) if args.perm else enumerate_derangements(ch.n)[0]
    if perm.n != ch.n:
        raise UsageError(f"permutation has {perm.n} stations, channel has {ch.n}")
    if not perm.is_derangement():
        raise UsageError(f"switch pattern {perm} connects a station to itself")
    cfg = {
        "n": ch.n,
        "channel": args.channel if args.channel else "rayleigh",
        "reciprocal": int(ch.is_reciprocal),
        "condition_bound": f"{args.condition_bound:g}",
        "redraws": redraws,
        "permutation": ",".join(str(i) for i in perm.one_based()),
    }
    return ch, perm, cfg


def _design_from_args(args):
    seed = args.seed if args.seed is not None else default_seed()
    ch, perm, cfg = _channel_and_perm(args, seed)
    params, pcfg = _system_params(args)
    scheme = parse_scheme_token(args.scheme)
    rng = np.random.default_rng(scheme.rng_seed) if scheme.rng_seed is not None else phase_stream(seed, 0, scheme, perm)
    d = design(ch, perm, params, scheme, rng)
    cfg = {**cfg, **pcfg, "scheme": scheme_token(scheme), "seed": seed}
    return ch, params, d, cfg, seed


def cmd_design(args) -> int:
    ch, params, d, cfg, _ = _design_from_args(args)
    res = design_residuals(d, ch, params)
    lines = [
        f"sigma_e_sq {d.sigma_e_sq:.12g}",
        f"rate_bits {d.rate:.12g}",
        f"relay_power {d.achieved_power:.12g}",
        f"trial {d.trial}",
        f"b_scalar {d.b_scalar:.12g}",
        "a " + " ".join(format_complex(z) for z in d.a),
        "b " + " ".join(format_complex(z) for z in d.b),
    ]
    lines += [f"g_row{j + 1} " + " ".join(format_complex(z) for z in row) for j, row in enumerate(d.g)]
    lines += [f"residual_{k} {v:.3g}" for k, v in res.items()]
    _emit(_header("design", cfg) + "\n".join(lines) + "\n", args.out)
    return 0


def cmd_verify(args) -> int:
    ch, params, d, cfg, seed = _design_from_args(args)
    cfg.update({"symbols": args.symbols, "tolerance": f"{args.tolerance:g}"})
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    report = verify_design(d, ch, params, args.symbols, args.tolerance, rng)
    tr = report.trace
    lines = [f"sigma_e_sq {d.sigma_e_sq:.12g}", f"expected_sinr {1.0 / d.sigma_e_sq:.12g}"]
    lines += report.lines()
    lines.append(f"max_residual_interference {float(np.max(tr.residual_interference)):.3g}")
    lines.append(f"result {'PASS' if report.passed else 'FAIL'}")
    _emit(_header("verify", cfg) + "\n".join(lines) + "\n", args.out)
    if not report.passed:
        f = report.failures[0]
        where = "" if f.station is None else f" station {f.station + 1}"
        _error("verification-failed", f"{len(report.failures)} check(s) failed, first: {f.name}{where}")
        return 2
    return 0


def cmd_schedule(args) -> int:
    demand = load_demand(args.demand)
    n = demand.n
    if args.set and args.set_index:
        raise UsageError("give either --set or --set-index")
    if args.set:
        try:
            members = [Derangement(parse_permutation(m).source_of) for m in args.set.split(";")]
        except ValueError as e:
            raise UsageError(f"bad --set: {e}") from None
        label = "custom"
    else:
        every = enumerate_condensed_sets(n)
        k = args.set_index or 1
        if not 1 <= k <= len(every):
            raise UsageError(f"--set-index must be in 1..{len(every)}")
        members = list(every[k - 1])
        label = f"Q{k}"
    rates = None
    if args.rates:
        try:
            rates = [float(x) for x in args.rates.split(",")]
        except ValueError:
            raise UsageError(f"bad --rates {args.rates!r}") from None
    sched = compile_schedule(demand, members, rates)
    cfg = {
        "demand": args.demand,
        "n": n,
        "set": label,
        "members": ";".join(",".join(str(i) for i in d.one_based()) for d in members),
        "rates": args.rates or "1",
    }
    rows = ["slot,derangement,payload,weight"]
    for k, slot in enumerate(sched.slots, 1):
        payload = " ".join(p if p is not None else "-" for p in slot.payload)
        rows.append(f"{k},{_csv_perm(slot.derangement)},{payload},{slot.weight:.12g}")
    _emit(_header("schedule", cfg) + "\n".join(rows) + "\n", args.out)
    return 0


SWEEP_KEYS = (
    "n", "snr_db", "realizations", "schemes", "permutation", "sets",
    "reciprocal", "condition_bound", "seed", "p", "channel", "workers",
)


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Unknown keys are rejected."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip() if not raw.lstrip().startswith("#") else ""
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ParseError(f"{path}: line {lineno}: expected key=value")
        if key not in SWEEP_KEYS:
            raise UsageError(f"{path}: line {lineno}: unknown key {key!r}")
        out[key] = val.strip()
    return out


def read_replay(path) -> dict:
    """Config keys from the header of an earlier sweep CSV."""
    keys = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("# ") and "=" in line:
            k, _, v = line[2:].partition("=")
            if k in SWEEP_KEYS:
                keys[k] = v
    if keys.get("channel") == "override":
        raise UsageError("cannot replay a sweep whose channel was passed programmatically")
    return keys


def _sweep_config(args):
    if args.config and args.replay:
        raise UsageError("give either --config or --replay")
    raw = read_config(args.config) if args.config else read_replay(args.replay) if args.replay else {}
    flags = {
        "n": args.n, "snr_db": args.snr_db, "realizations": args.realizations,
        "permutation": args.permutation, "sets": args.sets, "reciprocal": args.reciprocal,
        "condition_bound": args.condition_bound, "seed": args.seed, "p": args.p,
        "channel": args.channel, "workers": args.workers,
        "schemes": " ".join(args.scheme) if args.scheme else None,
    }
    raw.update({k: str(v) for k, v in flags.items() if v is not None})
    if "permutation" in raw and "sets" in raw:
        if args.permutation is not None and args.sets is None:
            del raw["sets"]
        elif args.sets is not None and args.permutation is None:
            del raw["permutation"]
        else:
            raise UsageError("give either permutation or sets, not both")
    try:
        seed = int(raw["seed"]) if "seed" in raw else default_seed()
        n = int(raw.get("n", 4))
        kw = dict(
            n=n,
            snr_points_db=parse_snr_list(raw.get("snr_db", "0,5,10,15,20")),
            num_realizations=int(raw.get("realizations", 1000)),
            schemes=tuple(parse_scheme_token(t) for t in raw.get("schemes", "basic-real").split()),
            reciprocal=bool(int(raw.get("reciprocal", 1))),
            condition_bound=float(raw.get("condition_bound", DEFAULT_CONDITION_BOUND)),
            rng_seed=seed,
            p=float(raw.get("p", 1.0)),
        )
        workers = int(raw.get("workers", 1))
    except ValueError as e:
        raise UsageError(f"bad sweep setting: {e}") from None
    header = {}
    if "channel" in raw:
        kw["channel_override"] = load_channel_file(raw["channel"], kw["condition_bound"])
        header["channel"] = raw["channel"]
    if "sets" in raw:
        kw["condensed_sets"], kw["set_labels"] = parse_sets(raw["sets"], n, seed)
    else:
        perm = parse_permutation(raw["permutation"]) if "permutation" in raw else enumerate_derangements(n)[0]
        kw["permutation"] = perm
    try:
        cfg = SweepConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return cfg, workers, header


def cmd_sweep(args) -> int:
    cfg, workers, header = _sweep_config(args)
    result = run_sweep(cfg, workers=workers)
    _emit(result.to_csv(header), args.out)
    return 0


def _pick_curve(path, label):
    curves = read_sweep_csv(Path(path))
    if label is None:
        if len(curves) != 1:
            raise UsageError(f"{path} holds {len(curves)} curves; choose one with a label ({', '.join(curves)})")
        label = next(iter(curves))
    if label not in curves:
        raise UsageError(f"no curve {label!r} in {path}; available: {', '.join(curves)}")
    return label, curves[label]


def cmd_gain(args) -> int:
    base_label, base = _pick_curve(args.baseline, args.baseline_label)
    curve_path = args.curve or args.baseline
    label, curve = _pick_curve(curve_path, args.label)
    if args.reference_throughput is not None:
        ref = args.reference_throughput
    else:
        x, y = base
        hit = np.isclose(x, args.reference_snr)
        if not hit.any():
            raise UsageError(f"baseline has no point at {args.reference_snr:g} dB")
        ref = float(y[hit][0])
    gain = db_gain(base, curve, ref)
    cfg = {
        "baseline": f"{args.baseline}:{base_label}",
        "curve": f"{curve_path}:{label}",
        "reference_throughput": f"{ref:.12g}",
    }
    if args.reference_throughput is None:
        cfg["reference_snr_db"] = f"{args.reference_snr:g}"
    _emit(_header("gain", cfg) + f"gain_db {gain:.12g}\n", args.out)
    return 0


# --- parser ------------------------------------------------------------------

def _add_design_args(p):
    p.add_argument("-n", type=int, help="number of stations (random channel)")
    p.add_argument("--channel", help="channel file (uplink block, optional downlink block)")
    p.add_argument("--nonreciprocal", action="store_true", help="draw an independent downlink")
    p.add_argument("--condition-bound", type=float, default=DEFAULT_CONDITION_BOUND)
    p.add_argument("--perm", help="1-based source_of list, e.g. 4,3,2,1 (default: first derangement)")
    p.add_argument("--scheme", default="basic-real", help="scheme token, e.g. 'random-phase[L=10,M=8]'")
    p.add_argument("--snr-db", type=float, default=10.0, help="sets sigma^2 = sigma_r^2 = 10^(-snr/10)")
    p.add_argument("--sigma-sq", type=float, help="station noise power (with --sigma-r-sq, overrides --snr-db)")
    p.add_argument("--sigma-r-sq", type=float, help="relay noise power")
    p.add_argument("--p", type=float, default=1.0, help="relay transmit power")
    p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    p.add_argument("--out", help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mimoswitch", description="MIMO switching relay design and simulation.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("enumerate", help="list derangements or condensed derangement sets")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--derangements", action="store_true")
    what.add_argument("--condensed", action="store_true")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("design", help="solve the relay for one channel and switch pattern")
    _add_design_args(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("verify", help="check a design with a symbol-level simulation")
    _add_design_args(p)
    p.add_argument("--symbols", type=int, default=10**6)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("schedule", help="assign a traffic demand to the slots of a condensed set")
    p.add_argument("--demand", required=True, help="lines 'source dests label [amount]', 1-based")
    p.add_argument("--set", help="derangements separated by ';', e.g. '2,3,1;3,1,2'")
    p.add_argument("--set-index", type=int, help="1-based index into the enumerated condensed sets")
    p.add_argument("--rates", help="comma-separated slot rates (default all 1)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("sweep", help="Monte Carlo throughput sweep, CSV output")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--replay", help="rerun from the header of an earlier sweep CSV")
    p.add_argument("-n", type=int)
    p.add_argument("--snr-db", help="'0,5,10' or 'start:step:stop'")
    p.add_argument("--realizations", type=int)
    p.add_argument("--scheme", action="append", help="scheme token (repeatable)")
    p.add_argument("--permutation", help="1-based source_of list for single-slot mode")
    p.add_argument("--sets", help="'all', 'sample:K' or 'Q1=a,b,..|..;Q2=...' for fair switching")
    p.add_argument("--reciprocal", type=int, choices=(0, 1))
    p.add_argument("--condition-bound", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--channel", help="fixed channel file used for every realization")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gain", help="dB gain of one sweep curve over another")
    p.add_argument("baseline", help="sweep CSV holding the baseline curve")
    p.add_argument("curve", nargs="?", help="sweep CSV holding the compared curve (default: baseline file)")
    p.add_argument("--baseline-label")
    p.add_argument("--label", help="label of the compared curve")
    p.add_argument("--reference-snr", type=float, default=10.0, help="reference = baseline throughput here")
    p.add_argument("--reference-throughput", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gain)
    return parser


def _error(kind: str, msg: str):
    sys.stderr.write(f"error kind={kind} msg={json.dumps(' '.join(str(msg).split()))}\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        _error("usage", str(e))
        return 1
    except (ParseError, InvalidSizeError) as e:
        _error(e.kind, str(e))
        return 1
    except MimoSwitchError as e:
        _error(e.kind, str(e))
        return 2
    except (OSError, ValueError) as e:
        _error("usage", str(e))
        return 1
