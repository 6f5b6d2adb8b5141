"""Command-line entry point.

Every experiment subcommand reads an optional config file plus flag overrides,
runs deterministically from its master seed, and writes results.csv and
manifest.json into the output directory. Exit codes: 0 success, 2 config or
parameter error, 3 feasibility cap exceeded, 4 conditioning event empty,
5 assertion/certificate failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import __version__, experiments, formulas, verify
from .activation import format_activation
from .config import MODEL_KEYS, SCHEMAS, RunConfig, parse_config
from .disorder import format_disorder
from .errors import (
    CertificationError,
    ConditioningEmptyError,
    ConfigError,
    FeasibilityError,
)
from .partition import count_exact, exists_solution, make_instance, solution_set
from .runio import format_cell, write_json, write_manifest, write_results
from .separation import ConfigSet, extract_separated_family
from .streams import SeededStream

__all__ = ["main", "build_parser"]

_SOLVABLE_HUNT_TRIES = 50


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perceptron-lab",
        description="Exact partition counts, separation certificates, and Monte Carlo checks.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(sub: argparse.ArgumentParser, qualified: str) -> None:
        sub.set_defaults(qualified=qualified)
        sub.add_argument("--config", default=None, help="config file path")
        for key, spec in SCHEMAS[qualified].items():
            sub.add_argument(f"--{key}", default=None, metavar="V", help=spec.doc)
        for key in MODEL_KEYS[qualified]:
            sub.add_argument(f"--{key}", default=None, metavar="V", help=f"model {key}")

    for name in ("enumerate", "separation", "threshold", "concentration", "universality", "slowdec", "tempgap"):
        add_config_flags(subparsers.add_parser(name), name)

    verify_parser = subparsers.add_parser("verify")
    verify_sub = verify_parser.add_subparsers(dest="verify_command", required=True)
    for short in ("addone", "allfail", "sup", "clt"):
        add_config_flags(verify_sub.add_parser(short), f"verify.{short}")

    formulas_parser = subparsers.add_parser("formulas")
    formulas_sub = formulas_parser.add_subparsers(dest="formulas_command", required=True)
    eval_parser = formulas_sub.add_parser("eval")
    eval_parser.add_argument("name", choices=sorted(_FORMULA_ARITY))
    eval_parser.add_argument("args", nargs="*")
    return parser


_FORMULA_ARITY = {
    "k2": 1,
    "psi2": 1,
    "rel_entropy": 2,
    "truncated_log": 3,
    "sudakov_lower": 2,
    "all_fail_bound": 2,
    "log_delta_gap": 3,
}


def _run_formula(name: str, raw_args: list[str]) -> int:
    if len(raw_args) != _FORMULA_ARITY[name]:
        print(f"{name} takes {_FORMULA_ARITY[name]} argument(s), got {len(raw_args)}", file=sys.stderr)
        return 2
    args = [float(a) for a in raw_args]
    if name == "k2":
        out = (formulas.k2(args[0]),)
    elif name == "psi2":
        out = (formulas.psi2(args[0]),)
    elif name == "rel_entropy":
        out = (formulas.rel_entropy(args[0], args[1]),)
    elif name == "truncated_log":
        out = (formulas.truncated_log(args[0], int(args[1]), args[2]),)
    elif name == "sudakov_lower":
        out = (formulas.sudakov_lower(args[0], int(args[1])),)
    elif name == "all_fail_bound":
        out = formulas.all_fail_bound(args[0], int(args[1]))
    else:
        out = formulas.log_delta_gap(args[0], args[1], args[2])
    print(",".join(format_cell(v) for v in out))
    return 0


def _resolve_m(cfg: RunConfig) -> int:
    if cfg.values.get("m") is not None:
        return int(cfg.values["m"])
    return experiments.m_from_alpha(cfg.values["n"], cfg.values["alpha"])


def _sign_string(row: np.ndarray) -> str:
    return "".join("+" if v > 0 else "-" for v in row)


def _hunt_solvable(cfg: RunConfig, n: int, m: int, stream: SeededStream):
    """First solvable instance along a derived stream; the solution set is S."""
    for k in range(_SOLVABLE_HUNT_TRIES):
        inst = make_instance(cfg.disorder, cfg.activation, n, m, stream.child(k))
        if exists_solution(inst):
            return solution_set(inst)
    raise ConditioningEmptyError(
        f"no solvable instance at n={n}, m={m} in {_SOLVABLE_HUNT_TRIES} attempts"
    )


def _run_enumerate(cfg: RunConfig, stream: SeededStream, timings: dict):
    n = cfg.values["n"]
    m = _resolve_m(cfg)
    t0 = time.perf_counter()
    inst = make_instance(cfg.disorder, cfg.activation, n, m, stream.child(0))
    res = count_exact(inst, cfg.values["delta"])
    seconds = time.perf_counter() - t0
    timings["enumerate"] = seconds
    alpha = m / n
    header = ["n", "m", "alpha", "z", "log_z", "log_trunc"]
    row = [n, m, alpha, res.z, res.log_z, res.log_trunc]
    stdout = [
        "n,m,alpha,z,log_z,log_trunc,seconds",
        ",".join(format_cell(v) for v in row + [seconds]),
    ]
    return header, [row], {}, stdout


def _run_separation(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    n, l = v["n"], v["l"]
    t0 = time.perf_counter()
    if v["source"] == "cube":
        s = ConfigSet.full_cube(n)
    else:
        s = ConfigSet.from_matrix(_hunt_solvable(cfg, n, experiments.m_from_alpha(n, v["alpha"]), stream.child(100)))
    family = extract_separated_family(
        s, v["delta"], v["eps"], v["gamma"], l, stream.child(1),
        n_tuple=v["n_tuple"], eta_min=v["eta_min"],
    )
    timings["extract"] = time.perf_counter() - t0
    configs = [_sign_string(row) for row in family.omega]
    certificate = {
        "omega_size": int(family.omega.shape[0]),
        "j_star": list(family.j_star),
        "eps": family.eps,
        "gamma": family.gamma,
        "l": family.blocks.l,
        "k": family.blocks.k,
        "verified": True,
        "configs": configs,
    }
    header = ["index", "config"]
    rows = [[i, c] for i, c in enumerate(configs)]
    return header, rows, {"certificate": certificate}, [f"certified family of {len(configs)} on blocks {list(family.j_star)}"]


def _run_verify_addone(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    n, m = v["n"], _resolve_m(cfg)
    t0 = time.perf_counter()
    est = verify.tail_addone((cfg.disorder, cfg.activation, n, m, v["delta"]), v["w_grid"], v["replicates"], stream)
    timings["tail"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    slope_lo, slope_hi = verify.bootstrap_slope_ci(est, stream.child(1_000_000))
    timings["bootstrap"] = time.perf_counter() - t0
    header = ["w", "p_hat", "ci_lo", "ci_hi", "fitted_slope", "fitted_c_delta", "slope_ci_lo", "slope_ci_hi"]
    rows = [
        [w, p, ci[0], ci[1], est.fitted_slope, est.fitted_c_delta, slope_lo, slope_hi]
        for w, p, ci in zip(est.w_grid, est.p_hat, est.intervals)
    ]
    extras = {"replicates": est.replicates, "discards": est.discards}
    return header, rows, extras, [f"accepted {est.replicates} replicates, slope {format_cell(est.fitted_slope)}"]


def _run_verify_allfail(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    reps = v["replicates"]
    header = ["eps", "n_process", "p_hat", "ci_lo", "ci_hi", "bound"]
    rows = []
    t0 = time.perf_counter()
    for i, eps in enumerate(v["eps_grid"]):
        for j, n_proc in enumerate(v["n_grid"]):
            p_hat, bound = verify.all_fail_frequency(eps, n_proc, reps, stream.child(i, j))
            lo, hi = verify.wilson_interval(int(round(p_hat * reps)), reps)
            rows.append([eps, n_proc, p_hat, lo, hi, bound])
    timings["allfail"] = time.perf_counter() - t0
    return header, rows, {}, [f"{len(rows)} grid points at {reps} replicates"]


def _run_verify_sup(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    n = v["n"]
    if v["source"] == "cube":
        s = ConfigSet.full_cube(n)
    else:
        s = ConfigSet.from_matrix(_hunt_solvable(cfg, n, experiments.m_from_alpha(n, v["alpha"]), stream.child(100)))
    if s.size > 1 << 14:
        raise FeasibilityError(f"|S| = {s.size} exceeds the sup-concentration cap 2^14")
    t0 = time.perf_counter()
    mean_sup, table, floor = verify.sup_concentration(
        cfg.disorder, s, v["replicates"], stream.child(1), eps=v["eps"], u_grid=v["u_grid"]
    )
    timings["sup"] = time.perf_counter() - t0
    header = ["u", "p_hat", "ci_lo", "ci_hi", "mean_sup", "sudakov_floor"]
    rows = [[u, p, lo, hi, mean_sup, floor] for u, p, lo, hi in table]
    return header, rows, {"set_size": s.size}, [f"mean sup {format_cell(mean_sup)} over |S|={s.size}"]


def _run_verify_clt(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    t0 = time.perf_counter()
    gap = verify.clt_gap(cfg.activation, v["p"], v["n"], cfg.disorder, v["replicates"], stream)
    timings["clt"] = time.perf_counter() - t0
    header = ["p", "n", "gap", "se"]
    return header, [[gap.p, gap.n, gap.value, gap.se]], {}, [f"gap {format_cell(gap.value)} (se {format_cell(gap.se)})"]


def _run_threshold(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    t0 = time.perf_counter()
    curve = experiments.threshold_scan((cfg.disorder, cfg.activation), v["n"], v["alpha_grid"], v["replicates"], stream)
    timings["scan"] = time.perf_counter() - t0
    header = [
        "alpha", "m", "p_solvable", "ci_lo", "ci_hi",
        "alpha_hat", "width_10_90", "alpha_ci_lo", "alpha_ci_hi", "width_ci_lo", "width_ci_hi",
    ]
    a_ci = curve.alpha_hat_ci or (None, None)
    w_ci = curve.width_ci or (None, None)
    rows = [
        [alpha, m, p, ci[0], ci[1], curve.alpha_hat, curve.width_10_90, a_ci[0], a_ci[1], w_ci[0], w_ci[1]]
        for alpha, m, p, ci in zip(curve.alpha_grid, curve.m_grid, curve.p_solvable, curve.intervals)
    ]
    note = (
        f"alpha_hat {format_cell(curve.alpha_hat)} width {format_cell(curve.width_10_90)}"
        if curve.alpha_hat is not None
        else "curve does not cross 0.5 in the grid; alpha_hat absent"
    )
    return header, rows, {}, [note]


def _run_concentration(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    t0 = time.perf_counter()
    report = experiments.concentration_scan(
        (cfg.disorder, cfg.activation), v["n_list"], v["alpha"], v["delta"], v["replicates"], stream
    )
    timings["scan"] = time.perf_counter() - t0
    header = ["n", "m", "mean", "std"]
    rows = [list(t) for t in zip(report.n_list, report.m_list, report.means, report.stds)]
    return header, rows, {}, [f"stds: {', '.join(format_cell(s) for s in report.stds)}"]


def _run_universality(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    t0 = time.perf_counter()
    report = experiments.universality_compare(
        cfg.activation, cfg.disorders, v["n"], v["alpha"], v["delta"], v["replicates"], stream, slack=v["slack"]
    )
    timings["compare"] = time.perf_counter() - t0
    header = ["spec_i", "spec_j", "mean_i", "mean_j", "se_i", "se_j", "abs_diff", "margin", "within"]
    rows = [
        [
            report.spec_names[i], report.spec_names[j],
            report.means[i], report.means[j], report.ses[i], report.ses[j],
            diff, margin, diff <= margin,
        ]
        for i, j, diff, margin in report.pairs
    ]
    worst = max((diff - margin for _, _, diff, margin in report.pairs), default=-math.inf)
    return header, rows, {}, [f"worst diff-minus-margin {format_cell(worst)}"]


def _run_slowdec(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    t0 = time.perf_counter()
    est = experiments.slow_decrease(
        (cfg.disorder, cfg.activation), v["n"], v["m"], v["rho"], v["delta"], v["replicates"], stream
    )
    timings["slowdec"] = time.perf_counter() - t0
    header = ["m", "m_extra", "p_hat", "ci_lo", "ci_hi", "accepted", "attempts"]
    rows = [[est.m, est.m_extra, est.p_hat, est.interval[0], est.interval[1], est.accepted, est.attempts]]
    return header, rows, {}, [f"p_hat {format_cell(est.p_hat)} on {est.accepted} accepted"]


def _run_tempgap(cfg: RunConfig, stream: SeededStream, timings: dict):
    v = cfg.values
    t0 = time.perf_counter()
    report = experiments.temp_truncation_gap(
        (cfg.disorder, cfg.activation), v["n"], v["alpha"], v["a_list"], v["delta"], v["replicates"], stream
    )
    timings["tempgap"] = time.perf_counter() - t0
    header = ["a", "mean_gap"]
    rows = [[a, g] for a, g in zip(report.a_list, report.mean_gaps)]
    return header, rows, {}, [f"gap at largest A: {format_cell(report.mean_gaps[-1])}"]


_RUNNERS = {
    "enumerate": _run_enumerate,
    "separation": _run_separation,
    "verify.addone": _run_verify_addone,
    "verify.allfail": _run_verify_allfail,
    "verify.sup": _run_verify_sup,
    "verify.clt": _run_verify_clt,
    "threshold": _run_threshold,
    "concentration": _run_concentration,
    "universality": _run_universality,
    "slowdec": _run_slowdec,
    "tempgap": _run_tempgap,
}


def _collect_overrides(args: argparse.Namespace, qualified: str) -> dict:
    overrides = {}
    for key in SCHEMAS[qualified]:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    for key in MODEL_KEYS[qualified]:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return overrides


def _execute(cfg: RunConfig) -> int:
    started = time.time()
    timings: dict = {}
    stream = SeededStream(cfg.values["seed"])
    header, rows, extras, stdout_lines = _RUNNERS[cfg.subcommand](cfg, stream, timings)
    out_dir = cfg.values["output_dir"]
    outputs = [write_results(out_dir, header, rows)]
    certificate = extras.pop("certificate", None)
    if certificate is not None:
        outputs.append(write_json(f"{out_dir}/certificate.json", certificate))
    write_manifest(
        out_dir, cfg.echo(), __version__, started, time.time(), timings, outputs, extras or None
    )
    for line in stdout_lines:
        print(line)
    for path in outputs:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "formulas":
        try:
            return _run_formula(args.name, args.args)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    qualified = args.qualified
    try:
        cfg = parse_config(qualified, args.config, _collect_overrides(args, qualified))
        return _execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FeasibilityError as exc:
        print(f"feasibility error: {exc}", file=sys.stderr)
        return 3
    except ConditioningEmptyError as exc:
        print(f"conditioning error: {exc}", file=sys.stderr)
        return 4
    except (CertificationError, AssertionError) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return 5
    except ValueError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
