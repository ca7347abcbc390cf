"""Command-line harness: seeded experiment runs emitting CSV result rows.

Config files are plain ``key = value`` lines.  ``#`` starts a comment,
blank lines are ignored, list values are comma separated, and each key may
appear once.  Keys not understood by the selected experiment are rejected.
See the README for the per-experiment key tables.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .channel import RngStream, check_distinct
from .kron import (
    InvalidPlanError,
    ProgramFormatError,
    construct_canceller,
    evaluate_program,
    format_program,
    k_max,
    parse_program,
    zf_residual,
)
from .linksim import (
    LinkConfig,
    ResultRow,
    condition_number_study,
    draw_thetas,
    measure_weak_sqnr_db,
    run_analog_chain,
    run_digital_baseline,
    sqnr_estimate_db,
    write_rows,
)

MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, bad value, invalid setup)."""


# --- value parsers ---------------------------------------------------------

def _int(text: str) -> int:
    try:
        return int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {text!r}")
    return v


def _list(item: Callable[[str], object]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigError("empty list")
        return tuple(item(p) for p in parts)

    return parse


def _method(text: str) -> str:
    if text not in ("exhaust", "greedy", "random"):
        raise ConfigError(f"unknown search method {text!r}; use exhaust, greedy or random")
    return text


def _thetas(text: str):
    if text.strip() == "uniform":
        return "uniform"
    return _list(_float)(text)


PARSERS: dict[str, Callable[[str], object]] = {
    "n_r": _int,
    "n_t": _int,
    "k": _int,
    "k_list": _list(_int),
    "it_streams": _int,
    "it_snr_db": _float,
    "adc_bits": _int,
    "bits_list": _list(_int),
    "modulation": _int,
    "modulations": _list(_int),
    "ratio_db": _list(_float),
    "swipt_snr_db": _list(_float),
    "sigma_list": _list(_float),
    "sqnr_c_db": _float,
    "block_len": _int,
    "n_symbols": _int,
    "n_realizations": _int,
    "method": _method,
    "methods": _list(_method),
    "hist_edges": _list(_float),
    "thetas": _thetas,
}

_DB_GRID = tuple(float(x) for x in range(0, 100, 10))
_HIST = (1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0, 50.0, 100.0)
_LINK = {
    "n_r": 4,
    "n_t": 4,
    "k": 1,
    "it_streams": 2,
    "it_snr_db": 10.0,
    "adc_bits": 6,
    "modulation": 4,
    "block_len": 1000,
    "n_symbols": 100_000,
}

DEFAULTS: dict[str, dict] = {
    "cond-dist": {
        "n_r": 12,
        "k": 2,
        "methods": ("exhaust", "greedy", "random"),
        "n_realizations": 10_000,
        "hist_edges": _HIST,
    },
    "adc-impact": {**_LINK, "bits_list": (6, 10, 14, 16), "ratio_db": _DB_GRID, "sqnr_c_db": 0.0},
    "ser-single": {**_LINK, "swipt_snr_db": _DB_GRID},
    "ser-multi": {**_LINK, "k": 2, "swipt_snr_db": _DB_GRID, "method": "greedy"},
    "tput-single": {**_LINK, "it_streams": 3, "modulations": (4, 16), "swipt_snr_db": _DB_GRID},
    "tput-multi": {**_LINK, "k": 2, "modulations": (4, 16), "swipt_snr_db": _DB_GRID, "method": "greedy"},
    "imperfect": {**_LINK, "ratio_db": _DB_GRID, "sigma_list": (0.0, 0.01, 0.1)},
    "k-impact": {
        "n_r": 16,
        "k_list": (1, 2, 3, 4),
        "method": "exhaust",
        "n_realizations": 80,
        "hist_edges": _HIST,
    },
    "construct-only": {"n_r": 6, "k": 2, "thetas": (0.7, 2.1), "method": "greedy"},
}

FULL_SCALE = {"n_symbols": 1_000_000, "n_realizations": 1_000_000}


@dataclass(frozen=True)
class ExperimentSpec:
    id: str
    settings: Mapping[str, object]
    seed: int = 0
    output_path: str | None = None
    full_scale: bool = False
    overrides: Mapping[str, object] = field(default_factory=dict)


# --- parsing and validation ------------------------------------------------

def _parse_lines(text: str) -> tuple[dict[str, str], dict[str, int]]:
    raw: dict[str, str] = {}
    where: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {where[key]})")
        raw[key] = value
        where[key] = lineno
    return raw, where


def parse_config(
    text: str,
    experiment: str | None = None,
    seed: int = 0,
    output_path: str | None = None,
    full_scale: bool = False,
) -> ExperimentSpec:
    """Parse config text into a validated spec with every default filled in.

    The experiment id comes from ``experiment`` or an ``experiment`` key in
    the text; when both are given they must agree.
    """
    raw, where = _parse_lines(text)
    file_exp = raw.pop("experiment", None)
    if experiment is not None and file_exp is not None and experiment != file_exp:
        raise ConfigError(f"experiment {experiment!r} conflicts with config value {file_exp!r}")
    exp = experiment or file_exp
    if exp is None:
        raise ConfigError("no experiment id given")
    if exp not in DEFAULTS:
        raise ConfigError(f"unknown experiment id {exp!r}; choose from {', '.join(DEFAULTS)}")
    if not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
    settings = dict(DEFAULTS[exp])
    if full_scale:
        settings.update({k: v for k, v in FULL_SCALE.items() if k in settings})
    overrides = {}
    for key, value in raw.items():
        if key not in settings:
            raise ConfigError(f"line {where[key]}: unknown key {key!r} for experiment {exp!r}")
        try:
            overrides[key] = PARSERS[key](value)
        except ConfigError as exc:
            raise ConfigError(f"line {where[key]}: {key}: {exc}") from None
    settings.update(overrides)
    _validate(exp, settings)
    return ExperimentSpec(exp, settings, seed, output_path, full_scale, overrides)


def _check_k(n_r: int, k: int) -> None:
    if n_r < 2:
        raise ConfigError(f"n_r must be at least 2, got {n_r}")
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if k > k_max(n_r):
        raise ConfigError(
            f"k={k} exceeds K_max({n_r}) = {k_max(n_r)}, the sum of the prime "
            f"exponents of n_r; the Kronecker construction cannot null more interferers"
        )


def _validate(exp: str, s: dict) -> None:
    for key in ("n_symbols", "n_realizations", "block_len"):
        if key in s and s[key] < 1:
            raise ConfigError(f"{key} must be positive, got {s[key]}")
    if "k_list" in s:
        for k in s["k_list"]:
            _check_k(s["n_r"], k)
    elif "k" in s:
        _check_k(s["n_r"], s["k"])
    if "hist_edges" in s and list(s["hist_edges"]) != sorted(set(s["hist_edges"])):
        raise ConfigError("hist_edges must be strictly increasing")
    if exp == "construct-only":
        th = s["thetas"]
        if th == "uniform":
            return
        if len(th) != s["k"]:
            raise ConfigError(f"{len(th)} thetas given for k={s['k']}")
        check_distinct(th)
        return
    if "it_streams" in s:
        # build one config per swept variant so bad combinations fail early
        try:
            for cfg in _link_configs(exp, s):
                pass
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _link_configs(exp: str, s: dict):
    base = dict(
        n_r=s["n_r"], n_t=s["n_t"], k=s["k"], it_streams=s["it_streams"],
        it_snr_db=s["it_snr_db"], adc_bits=s["adc_bits"], modulation=s["modulation"],
        block_len=s["block_len"], search_method=s.get("method", "greedy"),
    )
    if exp == "adc-impact":
        for b in s["bits_list"]:
            for r in s["ratio_db"]:
                yield LinkConfig(**{**base, "adc_bits": b, "ratio_db": r, "sqnr_c_db": s["sqnr_c_db"]})
    elif exp == "imperfect":
        for se in s["sigma_list"]:
            for r in s["ratio_db"]:
                yield LinkConfig(**{**base, "ratio_db": r, "sigma_e": se})
    elif exp in ("tput-single", "tput-multi"):
        for m in s["modulations"]:
            for rho in s["swipt_snr_db"]:
                yield LinkConfig(**{**base, "modulation": m, "swipt_snr_db": rho})
    else:
        for rho in s["swipt_snr_db"]:
            yield LinkConfig(**{**base, "swipt_snr_db": rho})


# --- experiment runners ----------------------------------------------------

class _Rows:
    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.rows: list[ResultRow] = []

    def add(self, sweep_name, sweep_value, metric, value, n):
        self.rows.append(ResultRow(self.spec.id, sweep_name, sweep_value, metric, float(value), int(n), self.spec.seed))


def _hist_rows(out: _Rows, sweep_name, sweep_value, study, edges):
    n = len(study.conds)
    probs, full_edges = study.histogram(edges)
    for p, lo, hi in zip(probs, full_edges[:-1], full_edges[1:]):
        out.add(sweep_name, sweep_value, f"hist[{lo:g},{hi:g})", p, n)
    out.add(sweep_name, sweep_value, "finite_fraction", study.finite_fraction, n)
    out.add(sweep_name, sweep_value, "fraction_below_30", study.fraction_below(30.0), n)
    finite = study.conds[np.isfinite(study.conds)]
    out.add(sweep_name, sweep_value, "median_cond", np.median(finite) if finite.size else math.inf, n)
    out.add(sweep_name, sweep_value, "mean_iterations", np.mean(study.iterations), n)


def _run_cond_dist(spec, out, rng):
    s = spec.settings
    for i, method in enumerate(s["methods"]):
        study = condition_number_study(s["n_r"], s["k"], method, s["n_realizations"], rng.child(i))
        _hist_rows(out, "method", method, study, s["hist_edges"])


def _run_k_impact(spec, out, rng):
    s = spec.settings
    for k in s["k_list"]:
        study = condition_number_study(s["n_r"], k, s["method"], s["n_realizations"], rng.child(k))
        _hist_rows(out, "k", k, study, s["hist_edges"])


def _run_adc_impact(spec, out, rng):
    s = spec.settings
    n = s["n_symbols"]
    for i, cfg in enumerate(_link_configs(spec.id, s)):
        tag = f"[adc_bits={cfg.adc_bits}]"
        stats = run_digital_baseline(cfg, n, rng.child(i))
        out.add("ratio_db", cfg.ratio_db, "digital_ser_it" + tag, stats.ser_it, n)
        out.add("ratio_db", cfg.ratio_db, "sqnr_estimate_db" + tag,
                sqnr_estimate_db(cfg.adc_bits, cfg.sqnr_c_db, cfg.ratio_db), 0)
        out.add("ratio_db", cfg.ratio_db, "sqnr_measured_db" + tag,
                measure_weak_sqnr_db(cfg.adc_bits, cfg.ratio_db, n, rng.child(i).child(1), n_r=cfg.n_r), n)


def _run_ser(spec, out, rng):
    n = spec.settings["n_symbols"]
    for i, cfg in enumerate(_link_configs(spec.id, spec.settings)):
        a = run_analog_chain(cfg, None, n, rng.child(i))
        d = run_digital_baseline(cfg, n, rng.child(i))
        out.add("swipt_snr_db", cfg.swipt_snr_db, "analog_ser_it", a.ser_it, n)
        out.add("swipt_snr_db", cfg.swipt_snr_db, "analog_ser_swipt", a.ser_swipt, n)
        out.add("swipt_snr_db", cfg.swipt_snr_db, "digital_ser_it", d.ser_it, n)


def _run_tput(spec, out, rng):
    n = spec.settings["n_symbols"]
    for i, cfg in enumerate(_link_configs(spec.id, spec.settings)):
        tag = f"[qam={cfg.modulation}]"
        a = run_analog_chain(cfg, None, n, rng.child(i))
        d = run_digital_baseline(cfg, n, rng.child(i))
        out.add("swipt_snr_db", cfg.swipt_snr_db, "analog_throughput" + tag, a.throughput, n)
        out.add("swipt_snr_db", cfg.swipt_snr_db, "digital_throughput" + tag, d.throughput, n)
        ratio = a.throughput / d.throughput if d.throughput > 0 else math.inf
        out.add("swipt_snr_db", cfg.swipt_snr_db, "throughput_ratio" + tag, ratio, n)


def _run_imperfect(spec, out, rng):
    s = spec.settings
    n = s["n_symbols"]
    n_r = len(s["ratio_db"])
    for i, cfg in enumerate(_link_configs(spec.id, s)):
        # same stream per ratio across sigma values: paired comparison
        point = rng.child(i % n_r)
        a = run_analog_chain(cfg, None, n, point)
        out.add("ratio_db", cfg.ratio_db, f"analog_ser_it[sigma_e={cfg.sigma_e:g}]", a.ser_it, n)
        if i < n_r:
            d = run_digital_baseline(cfg, n, point)
            out.add("ratio_db", cfg.ratio_db, "digital_ser_it", d.ser_it, n)


def _construct(spec, rng):
    s = spec.settings
    thetas = s["thetas"]
    if thetas == "uniform":
        thetas = tuple(float(t) for t in draw_thetas(s["k"], rng))
    return thetas, construct_canceller(s["n_r"], thetas, s["method"], rng=rng.child(1))


def _run_construct_only(spec, out, rng, stream):
    thetas, c = _construct(spec, rng)
    S = c.canceller.matrix
    res = zf_residual(S, thetas)
    m = c.metrics
    print(f"plan {c.plan.factors}  thetas {tuple(round(t, 6) for t in thetas)}", file=stream)
    for i, idx in enumerate(c.selection.indices):
        meta = c.mother_set.meta[idx]
        print(f"  row {i}: order {meta.order} rows {meta.rows}", file=stream)
    with np.printoptions(precision=4, suppress=True, linewidth=120):
        print(S, file=stream)
    print(f"zf_residual {res:.3e}  condition_number {m.condition_number:.6g}  rank {m.numeric_rank}", file=stream)
    out.add("none", "", "zf_residual", res, 1)
    out.add("none", "", "condition_number", m.condition_number, 1)
    out.add("none", "", "numeric_rank", m.numeric_rank, 1)
    for (r, col), z in np.ndenumerate(S):
        out.add("entry", f"{r},{col}", "phase", float(np.angle(z)), 1)


RUNNERS = {
    "cond-dist": _run_cond_dist,
    "adc-impact": _run_adc_impact,
    "ser-single": _run_ser,
    "ser-multi": _run_ser,
    "tput-single": _run_tput,
    "tput-multi": _run_tput,
    "imperfect": _run_imperfect,
    "k-impact": _run_k_impact,
}


def run_experiment(spec: ExperimentSpec, stream=None) -> list[ResultRow]:
    """Run ``spec``, append its rows to ``spec.output_path`` (if set), print a summary."""
    stream = sys.stdout if stream is None else stream
    out = _Rows(spec)
    rng = RngStream(spec.seed)
    if spec.id == "construct-only":
        _run_construct_only(spec, out, rng, stream)
    else:
        RUNNERS[spec.id](spec, out, rng)
        for row in out.rows:
            print(f"{row.sweep_name}={row.sweep_value} {row.metric} = {row.value:.6g}", file=stream)
    if spec.output_path is not None:
        try:
            write_rows(spec.output_path, out.rows)
        except OSError as exc:
            raise OSError(f"cannot write results to {spec.output_path}: {exc.strerror or exc}") from exc
    return out.rows


def export_phase_program(spec: ExperimentSpec) -> str:
    """Serialized phase program for a construct-only spec."""
    if spec.id != "construct-only":
        raise ConfigError(f"phase programs come from construct-only specs, not {spec.id!r}")
    _, c = _construct(spec, RngStream(spec.seed))
    return format_program(c.program)


# --- entry point -------------------------------------------------------------

def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ascancel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and append CSV rows")
    run.add_argument("--experiment", required=True, choices=sorted(DEFAULTS))
    run.add_argument("--config", help="key = value override file")
    run.add_argument("--seed", type=_seed, default=0)
    run.add_argument("--out", required=True, help="CSV output path (appended)")
    run.add_argument("--full-scale", action="store_true", help="use full Monte-Carlo budgets")

    exp = sub.add_parser("export-program", help="write the phase program of a construct-only config")
    exp.add_argument("--config", help="key = value override file")
    exp.add_argument("--seed", type=_seed, default=0)
    exp.add_argument("--out", required=True)

    ev = sub.add_parser("eval-program", help="evaluate a phase program at given angles")
    ev.add_argument("--program", required=True)
    ev.add_argument("--thetas", required=True, help="comma-separated phase steps")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "eval-program":
            prog = parse_program(_read(args.program))
            thetas = _list(_float)(args.thetas)
            S = evaluate_program(prog, thetas).matrix
            with np.printoptions(precision=4, suppress=True, linewidth=120):
                print(S)
            print(f"zf_residual {zf_residual(S, thetas):.3e}")
            return 0
        text = _read(args.config) if args.config else ""
        if args.command == "export-program":
            spec = parse_config(text, "construct-only", args.seed)
            program = export_phase_program(spec)
            try:
                with open(args.out, "w") as fh:
                    fh.write(program)
            except OSError as exc:
                raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
            return 0
        spec = parse_config(text, args.experiment, args.seed, args.out, args.full_scale)
        run_experiment(spec)
        return 0
    except (ConfigError, InvalidPlanError, ProgramFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
