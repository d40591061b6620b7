"""Batch command-line front end.

One JSON config document per run; subcommands `bounds`, `simulate`,
`eig-check`, `doa`, and `sweep`. Output is CSV or JSON with a fixed column
order, reproducible byte for byte from (config, seed) regardless of
--threads.

Exit codes: 0 success, 2 config error, 3 resource-cap error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from itertools import product

import numpy as np

from . import bounds as bd
from . import montecarlo as mc
from .model import (
    CapExceeded,
    FieldTag,
    ModelConfig,
    load_matrix_csv,
    make_support,
    sample_gaussian_matrix,
    substream,
    ula_angle_grid,
    ula_manifold_matrix,
)
from .spectra import (
    covariance,
    h_eigenvalues,
    matrix_incoherence,
    qr_lower_bound_eigs,
    spectrum_split,
    upper_bound_eigs,
)

SEED_ENV_VAR = "SUPREC_SEED"

SIMULATE_COLUMNS = ("mode", "N", "M", "K", "T", "sigma2", "seed", "trials", "p_hat",
                    "ci_low", "ci_high", "chernoff_clamped", "fano_clamped", "lambda_bar")
EIGCHECK_COLUMNS = ("trial", "M", "N", "K", "k_i", "k0", "k1", "count_gt", "count_eq",
                    "count_lt", "min_slack_lower", "min_slack_upper")
BOUNDS_COLUMNS = ("formula_id", "inputs", "raw", "clamped", "applicable", "notes")
DOA_COLUMNS = ("formula_id", "quantity", "epsilon", "N", "K", "sigma2",
               "exact_binomial", "relaxed", "log2_corrected")


class ConfigError(ValueError):
    """Invalid run configuration; maps to exit code 2."""


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _require(cfg: dict, key: str, types, where: str):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required key '{key}'")
    value = cfg[key]
    if not isinstance(value, types):
        raise ConfigError(f"{where}: key '{key}' has invalid type {type(value).__name__}")
    return value

def _as_list(value) -> list:
    return list(value) if isinstance(value, list) else [value]


def _positive_int(cfg, key, where, default=None):
    if default is not None and key not in cfg:
        return default
    v = _require(cfg, key, int, where)
    if isinstance(v, bool) or v < 1:
        raise ConfigError(f"{where}: '{key}' must be a positive integer")
    return v


def _field_of(cfg: dict, where: str) -> FieldTag:
    name = cfg.get("field", "real")
    try:
        return FieldTag(name)
    except ValueError:
        raise ConfigError(f"{where}: unknown field {name!r}") from None


def _build_matrix(cfg: dict, M: int, N: int, field: FieldTag, seed: int, where: str):
    mat = cfg.get("matrix", {"kind": "gaussian"})
    kind = mat.get("kind", "gaussian")
    if kind == "gaussian":
        return sample_gaussian_matrix(M, N, field, substream(seed, "cli-matrix"))
    if kind == "ula":
        spacing = float(mat.get("spacing", 0.5))
        return ula_manifold_matrix(M, ula_angle_grid(N), spacing)
    if kind == "csv":
        path = _require(mat, "path", str, f"{where}.matrix")
        A = load_matrix_csv(path)
        if A.shape != (M, N):
            raise ConfigError(f"{where}.matrix: CSV matrix shape {A.shape} != ({M}, {N})")
        return A
    raise ConfigError(f"{where}.matrix: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# bounds

_BOUND_FORMULAS = {
    "multiple_geometric": (("lambda_bar", "N", "K", "T", "kappa"), ()),
    "multiple_union": (("lambda_bar", "N", "K", "T", "kappa"), ()),
    "fano_lower": (("beta", "L"), ()),
    "ensemble_fano": (("M", "N", "K", "sigma2", "T", "kappa"), ()),
    "snet": (("epsilon", "N", "K", "sigma2", "kappa", "normalization"), ()),
    "doa": (("epsilon", "N", "K", "sigma2"), ()),
    "gaussian_necessary": (("epsilon", "N", "K", "sigma2", "kappa"), ("delta",)),
    "sufficiency": (("M", "N", "K", "T", "sigma2", "kappa"), ()),
    "expected_incoherence": (("M", "K", "k_d", "sigma2"), ()),
    "hypergeometric_mean": (("N", "K"), ()),
    "chernoff_mu": (("eigenvalues", "s", "T", "kappa"), ()),
}


def _validate_bounds(config: dict) -> list:
    queries = _require(config, "queries", list, "config")
    if not queries:
        raise ConfigError("config: 'queries' must be a non-empty list")
    for i, q in enumerate(queries):
        where = f"queries[{i}]"
        if not isinstance(q, dict):
            raise ConfigError(f"{where}: each query must be an object")
        formula = _require(q, "formula", str, where)
        if formula not in _BOUND_FORMULAS:
            raise ConfigError(f"{where}: unknown formula {formula!r}")
        required, _ = _BOUND_FORMULAS[formula]
        for key in required:
            if key not in q:
                raise ConfigError(f"{where}: formula {formula!r} requires key '{key}'")
    return queries


def _bound_record(formula: str, inputs: dict, raw, clamped, applicable, notes) -> dict:
    return {"formula_id": formula, "inputs": inputs, "raw": raw, "clamped": clamped,
            "applicable": applicable, "notes": notes}


def run_bounds(config: dict, seed: int, threads: int):
    queries = _validate_bounds(config)
    records = []
    for q in queries:
        formula = q["formula"]
        inputs = {k: v for k, v in q.items() if k != "formula"}
        try:
            if formula == "multiple_geometric":
                r = bd.multiple_bound_geometric(q["lambda_bar"], q["N"], q["K"], q["T"], q["kappa"])
                rec = _bound_record(formula, inputs, r.raw_value, r.clamped, r.applicable,
                                    r.precondition_note)
            elif formula == "multiple_union":
                r = bd.multiple_bound_union(q["lambda_bar"], q["N"], q["K"], q["T"], q["kappa"])
                rec = _bound_record(formula, inputs, r.raw_value, r.clamped, r.applicable,
                                    r.precondition_note)
            elif formula == "fano_lower":
                r = bd.fano_lower(q["beta"], q["L"])
                rec = _bound_record(formula, inputs, r.raw_value, r.clamped, r.applicable,
                                    r.precondition_note)
            elif formula == "ensemble_fano":
                r = bd.ensemble_fano_lower(q["M"], q["N"], q["K"], q["sigma2"], q["T"], q["kappa"])
                rec = _bound_record(formula, inputs, r.raw_value, r.clamped, r.applicable,
                                    f"beta={r.extras['beta']!r}")
            elif formula == "snet":
                t = bd.snet_requirements(q["epsilon"], q["N"], q["K"], q["sigma2"], q["kappa"],
                                         q["normalization"])
                rec = _bound_record(formula, inputs, t.value, None, True,
                                    json.dumps(t.forms, sort_keys=True))
            elif formula == "doa":
                t = bd.doa_requirements(q["epsilon"], q["N"], q["K"], q["sigma2"])
                rec = _bound_record(formula, inputs, t.value, None, True,
                                    json.dumps(t.forms, sort_keys=True))
            elif formula == "gaussian_necessary":
                t = bd.gaussian_necessary(q["epsilon"], q.get("delta"), q["N"], q["K"],
                                          q["sigma2"], q["kappa"])
                rec = _bound_record(formula, inputs, t.value, None, True,
                                    json.dumps(t.forms, sort_keys=True))
            elif formula == "sufficiency":
                s = bd.gaussian_sufficiency_report(q["M"], q["N"], q["K"], q["T"], q["sigma2"],
                                                   q["kappa"])
                notes = json.dumps({"m_over_klognk": s.m_over_klognk,
                                    "t_condition_ratio": s.t_condition_ratio,
                                    "t_loglog_ratio": s.t_loglog_ratio,
                                    "exponent_ceiling": s.exponent_ceiling,
                                    "notes": list(s.notes)}, sort_keys=True)
                rec = _bound_record(formula, inputs, s.gamma, None, s.gamma is not None, notes)
            elif formula == "expected_incoherence":
                low, high = bd.expected_incoherence_bounds(q["M"], q["K"], q["k_d"], q["sigma2"])
                rec = _bound_record(formula, inputs, low, None, True, f"interval=[{low!r}, {high!r}]")
            elif formula == "hypergeometric_mean":
                value = bd.hypergeometric_mean_check(q["N"], q["K"])
                rec = _bound_record(formula, inputs, value, None, True,
                                    f"closed_form={q['K'] * (q['N'] - q['K']) / q['N']!r}")
            else:  # chernoff_mu
                value = bd.chernoff_mu(q["eigenvalues"], q["s"], q["T"], q["kappa"])
                rec = _bound_record(formula, inputs, value, None, True, "")
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"query {formula}: {exc}") from exc
        records.append(rec)
    return BOUNDS_COLUMNS, records, []


# ---------------------------------------------------------------------------
# simulate

def _validate_simulate(config: dict, seed: int) -> dict:
    where = "config"
    mode = _require(config, "mode", str, where)
    if mode not in ("binary", "multiple", "ensemble"):
        raise ConfigError(f"{where}: mode must be binary|multiple|ensemble, got {mode!r}")
    N = _positive_int(config, "N", where)
    M = _positive_int(config, "M", where)
    K = _positive_int(config, "K", where)
    if K > N:
        raise ConfigError(f"{where}: K={K} exceeds N={N}")
    Ts = [_positive_int({"T": t}, "T", where) for t in _as_list(_require(config, "T", (int, list), where))]
    sig_raw = _as_list(_require(config, "sigma2", (int, float, list), where))
    sigma2s = []
    for s in sig_raw:
        if not isinstance(s, (int, float)) or isinstance(s, bool) or s <= 0:
            raise ConfigError(f"{where}: sigma2 values must be positive numbers")
        sigma2s.append(float(s))
    trials = _positive_int(config, "trials", where)
    field = _field_of(config, where)
    plan = {"mode": mode, "N": N, "M": M, "K": K, "Ts": Ts, "sigma2s": sigma2s,
            "trials": trials, "field": field}
    if mode == "binary":
        s0 = _require(config, "S0", list, where)
        s1 = _require(config, "S1", list, where)
        try:
            plan["S0"] = make_support(s0, N)
            plan["S1"] = make_support(s1, N)
        except ValueError as exc:
            raise ConfigError(f"{where}: invalid support: {exc}") from exc
        if plan["S0"].indices == plan["S1"].indices:
            raise ConfigError(f"{where}: S0 and S1 must differ")
        if plan["S0"].size != K or plan["S1"].size != K:
            raise ConfigError(f"{where}: supports must have size K={K}")
    if mode == "ensemble":
        plan["matrix_draws"] = _positive_int(config, "matrix_draws", where)
        plan["trials_per_matrix"] = _positive_int(config, "trials_per_matrix", where)
    if mode == "multiple" and math.comb(N, K) > config.get("candidate_cap", 10**6):
        raise CapExceeded(f"C({N},{K}) = {math.comb(N, K)} candidate supports exceed cap")
    return plan


def _simulate_row(mode, N, M, K, T, sigma2, seed, est: mc.ErrorEstimate,
                  chernoff, fano, lambda_bar) -> dict:
    return {"mode": mode, "N": N, "M": M, "K": K, "T": T, "sigma2": sigma2, "seed": seed,
            "trials": est.trials, "p_hat": est.p_hat, "ci_low": est.ci_low,
            "ci_high": est.ci_high, "chernoff_clamped": chernoff, "fano_clamped": fano,
            "lambda_bar": lambda_bar}


def run_simulate(config: dict, seed: int, threads: int):
    plan = _validate_simulate(config, seed)
    mode, N, M, K = plan["mode"], plan["N"], plan["M"], plan["K"]
    field, trials = plan["field"], plan["trials"]
    rows = []

    if mode == "ensemble":
        for T, sigma2 in product(plan["Ts"], plan["sigma2s"]):
            spec = mc.ExperimentSpec(
                config=ModelConfig(N=N, M=M, K=K, T=T, sigma2=sigma2, field=field,
                                   master_seed=seed),
                mode="ensemble", trials=plan["trials_per_matrix"],
                matrix_draws=plan["matrix_draws"])
            est = mc.run_experiment(spec, workers=threads)
            fano = bd.ensemble_fano_lower(M, N, K, sigma2, T, field.kappa).clamped
            rows.append(_simulate_row("ensemble", N, M, K, T, sigma2, seed, est, None, fano, None))
            n_inner = plan["trials_per_matrix"]
            for p in est.extras["per_matrix"]:
                lo, hi = mc.clopper_pearson(round(p * n_inner), n_inner)
                sub = mc.ErrorEstimate(p_hat=p, trials=n_inner, ci_low=lo, ci_high=hi,
                                       master_seed=seed)
                rows.append(_simulate_row("ensemble-matrix", N, M, K, T, sigma2, seed, sub,
                                          None, None, None))
        return SIMULATE_COLUMNS, rows, []

    A = _build_matrix(config, M, N, field, seed, "config")
    if mode == "binary":
        S0, S1 = plan["S0"], plan["S1"]
        for T, sigma2 in product(plan["Ts"], plan["sigma2s"]):
            spec = mc.ExperimentSpec(
                config=ModelConfig(N=N, M=M, K=K, T=T, sigma2=sigma2, field=field,
                                   master_seed=seed),
                mode="binary", trials=trials, S0=S0, S1=S1)
            est = mc.run_experiment(spec, A=A, workers=threads)
            report = bd.binary_chernoff(A, S0, S1, sigma2, T)
            lam = min(report.extras["lambda_01"], report.extras["lambda_10"])
            Sig0, Sig1 = covariance(A, S0, sigma2), covariance(A, S1, sigma2)
            beta = (bd.kl_divergence(Sig0, Sig1, T, field.kappa)
                    + bd.kl_divergence(Sig1, Sig0, T, field.kappa)) / 4.0
            fano = bd.fano_lower(beta, 2).clamped
            rows.append(_simulate_row("binary", N, M, K, T, sigma2, seed, est,
                                      report.clamped, fano, lam))
    else:
        inc_cfg = config.get("incoherence", {})
        inc_mode = inc_cfg.get("mode", "exhaustive")
        for T, sigma2 in product(plan["Ts"], plan["sigma2s"]):
            spec = mc.ExperimentSpec(
                config=ModelConfig(N=N, M=M, K=K, T=T, sigma2=sigma2, field=field,
                                   master_seed=seed),
                mode="multiple", trials=trials)
            est = mc.run_experiment(spec, A=A, workers=threads)
            summary = matrix_incoherence(A, K, sigma2, mode=inc_mode,
                                         sample_count=inc_cfg.get("count"), seed=seed)
            chern = bd.multiple_bound_geometric(summary.lambda_bar, N, K, T, field.kappa).clamped
            fano = bd.fano_lower(bd.fano_beta_exact(A, K, sigma2, T), math.comb(N, K)).clamped
            rows.append(_simulate_row("multiple", N, M, K, T, sigma2, seed, est,
                                      chern, fano, summary.lambda_bar))
    return SIMULATE_COLUMNS, rows, []


# ---------------------------------------------------------------------------
# eig-check

def _validate_eigcheck(config: dict) -> dict:
    where = "config"
    grid = _require(config, "grid", dict, where)
    Ms = [_positive_int({"M": m}, "M", f"{where}.grid") for m in _as_list(_require(grid, "M", (int, list), f"{where}.grid"))]
    Ks = [_positive_int({"K": k}, "K", f"{where}.grid") for k in _as_list(_require(grid, "K", (int, list), f"{where}.grid"))]
    draws = _positive_int(config, "draws_per_cell", where, default=24)
    sigma2 = float(config.get("sigma2", 1.0))
    if sigma2 <= 0:
        raise ConfigError(f"{where}: sigma2 must be positive")
    for M in Ms:
        for K in Ks:
            if M < 2 * K:
                raise ConfigError(f"{where}: cell (M={M}, K={K}) violates M >= 2K")
    return {"Ms": Ms, "Ks": Ks, "draws": draws, "sigma2": sigma2,
            "field": _field_of(config, where), "tolerance": float(config.get("tolerance", 1e-8))}


def run_eig_check(config: dict, seed: int, threads: int):
    plan = _validate_eigcheck(config)
    sigma2, tol = plan["sigma2"], plan["tolerance"]
    rows = []
    violations = 0
    trial_id = 0
    for M in plan["Ms"]:
        for K in plan["Ks"]:
            N = 2 * K + 2
            for overlap in range(K):
                S0 = make_support(range(K), N)
                S1 = make_support(list(range(overlap)) + list(range(K, 2 * K - overlap)), N)
                k_i = overlap
                k0 = k1 = K - overlap
                for d in range(plan["draws"]):
                    rng = substream(seed, f"eig-check-{M}-{K}-{overlap}", d)
                    A = sample_gaussian_matrix(M, N, plan["field"], rng)
                    eigs = h_eigenvalues(A, S0, S1, sigma2)
                    split = spectrum_split(eigs, tolerance=tol * max(1.0, float(eigs[0])))
                    gt = np.asarray(split.eigenvalues[:split.count_gt])
                    lower = qr_lower_bound_eigs(A, S0, S1, sigma2)
                    upper = upper_bound_eigs(A, S0, S1, sigma2)
                    if split.count_gt == len(lower):
                        slack_low = float(np.min(gt - lower))
                        slack_up = float(np.min(upper - gt))
                    else:
                        slack_low = slack_up = float("nan")
                    ok = (split.count_gt == k0 and split.count_lt == k1
                          and split.count_eq == M - k0 - k1
                          and slack_low >= -1e-9 and slack_up >= -1e-9)
                    violations += 0 if ok else 1
                    rows.append({"trial": trial_id, "M": M, "N": N, "K": K, "k_i": k_i,
                                 "k0": k0, "k1": k1, "count_gt": split.count_gt,
                                 "count_eq": split.count_eq, "count_lt": split.count_lt,
                                 "min_slack_lower": slack_low, "min_slack_upper": slack_up})
                    trial_id += 1
    return EIGCHECK_COLUMNS, rows, [f"# violations={violations}"]


# ---------------------------------------------------------------------------
# doa

def _validate_doa(config: dict) -> dict:
    where = "config"
    eps = [float(e) for e in _as_list(_require(config, "epsilon", (int, float, list), where))]
    Ns = _as_list(_require(config, "N", (int, list), where))
    Ks = _as_list(_require(config, "K", (int, list), where))
    sig = [float(s) for s in _as_list(_require(config, "sigma2", (int, float, list), where))]
    for e in eps:
        if not 0 < e < 1:
            raise ConfigError(f"{where}: epsilon values must lie in (0, 1)")
    for s in sig:
        if s <= 0:
            raise ConfigError(f"{where}: sigma2 values must be positive")
    for N, K in product(Ns, Ks):
        if not 1 <= K < N:
            raise ConfigError(f"{where}: need 1 <= K < N, got K={K}, N={N}")
    plan = {"eps": eps, "Ns": Ns, "Ks": Ks, "sig": sig}
    if "ula_lambda" in config:
        u = config["ula_lambda"]
        uw = f"{where}.ula_lambda"
        plan["ula"] = {"M": _positive_int(u, "M", uw), "grid_size": _positive_int(u, "grid_size", uw),
                       "K": _positive_int(u, "K", uw), "spacing": float(u.get("spacing", 0.5)),
                       "pairs": _positive_int(u, "pairs", uw, default=200),
                       "sigma2": float(u.get("sigma2", 1.0))}
    return plan


def run_doa(config: dict, seed: int, threads: int):
    plan = _validate_doa(config)
    rows = []
    for eps, N, K, sigma2 in product(plan["eps"], plan["Ns"], plan["Ks"], plan["sig"]):
        t = bd.doa_requirements(eps, N, K, sigma2)
        rows.append({"formula_id": t.formula_id, "quantity": t.quantity, "epsilon": eps,
                     "N": N, "K": K, "sigma2": sigma2,
                     "exact_binomial": t.forms["exact_binomial"], "relaxed": t.forms["relaxed"],
                     "log2_corrected": t.forms["log2_corrected"]})
    comments = []
    if "ula" in plan:
        u = plan["ula"]
        A = ula_manifold_matrix(u["M"], ula_angle_grid(u["grid_size"]), u["spacing"])
        summary = matrix_incoherence(A, u["K"], u["sigma2"], mode="sampled",
                                     sample_count=u["pairs"], seed=seed)
        comments.append(f"# ula_lambda_bar={summary.lambda_bar!r} mode={summary.mode}"
                        f" M={u['M']} grid={u['grid_size']} K={u['K']} sigma2={u['sigma2']!r}")
    return DOA_COLUMNS, rows, comments


# ---------------------------------------------------------------------------
# sweep

def _validate_sweep(config: dict) -> tuple:
    where = "config"
    command = _require(config, "command", str, where)
    if command not in ("bounds", "simulate", "eig-check", "doa"):
        raise ConfigError(f"{where}: sweep cannot drive command {command!r}")
    base = _require(config, "base", dict, where)
    grid = _require(config, "grid", dict, where)
    if not grid:
        raise ConfigError(f"{where}: sweep grid must be non-empty")
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{where}: grid entry {key!r} must be a non-empty list")
    return command, base, grid


def run_sweep(config: dict, seed: int, threads: int):
    command, base, grid = _validate_sweep(config)
    keys = sorted(grid)
    columns = None
    rows = []
    comments = []
    runner = COMMANDS[command]
    # Validate every grid point before running any (atomic validation pass).
    configs = []
    for combo in product(*(grid[k] for k in keys)):
        cfg = dict(base)
        cfg.update(dict(zip(keys, combo)))
        configs.append(cfg)
    for cfg in configs:
        runner.validate(cfg, seed)
    for cfg in configs:
        cols, sub_rows, sub_comments = runner.run(cfg, seed, threads)
        columns = cols
        rows.extend(sub_rows)
        comments.extend(sub_comments)
    return columns, rows, comments


# ---------------------------------------------------------------------------
# dispatch and output

class _Command:
    def __init__(self, run, validate):
        self.run = run
        self.validate = validate


COMMANDS = {
    "bounds": _Command(run_bounds, lambda cfg, seed: _validate_bounds(cfg)),
    "simulate": _Command(run_simulate, lambda cfg, seed: _validate_simulate(cfg, seed)),
    "eig-check": _Command(run_eig_check, lambda cfg, seed: _validate_eigcheck(cfg)),
    "doa": _Command(run_doa, lambda cfg, seed: _validate_doa(cfg)),
    "sweep": _Command(run_sweep, lambda cfg, seed: _validate_sweep(cfg)),
}


def _write_output(out_path, fmt: str, columns, rows, comments, command: str, seed: int) -> None:
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(_csv_cell(row.get(c)) for c in columns))
        lines.extend(comments)
        body = "\n".join(lines) + "\n"
    else:
        payload = {"command": command, "seed": seed, "columns": list(columns),
                   "records": rows, "comments": [c.lstrip("# ") for c in comments]}
        body = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    if out_path is None:
        sys.stdout.write(body)
    else:
        with open(out_path, "w", newline="") as fh:
            fh.write(body)


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _csv_cell(value) -> str:
    if isinstance(value, dict):
        return '"' + json.dumps(value, sort_keys=True).replace('"', '""') + '"'
    text = _fmt(value)
    if "," in text or '"' in text:
        text = '"' + text.replace('"', '""') + '"'
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="suprec",
        description="Support-recovery bounds and Monte Carlo experiments (batch, seeded).",
        epilog="Output schemas are fixed: simulate -> %s; eig-check -> %s; "
               "doa -> %s; bounds -> %s." % (",".join(SIMULATE_COLUMNS), ",".join(EIGCHECK_COLUMNS),
                                             ",".join(DOA_COLUMNS), ",".join(BOUNDS_COLUMNS)))
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("bounds", "evaluate closed-form bound/threshold queries"),
                            ("simulate", "Monte Carlo error-probability experiments"),
                            ("eig-check", "eigenvalue count and sandwich verification sweep"),
                            ("doa", "DOA sample-count thresholds (and optional ULA incoherence)"),
                            ("sweep", "generic grid driver over another subcommand")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help=f"master seed (overrides ${SEED_ENV_VAR} and the config)")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; affects speed only, never results")
    return parser


def _resolve_seed(args, config: dict) -> int:
    if args.seed is not None:
        seed = args.seed
    elif os.environ.get(SEED_ENV_VAR):
        try:
            seed = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"${SEED_ENV_VAR} must be an integer") from None
    else:
        seed = config.get("master_seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"suprec: cannot read config: {exc}", file=sys.stderr)
        return 2
    if not isinstance(config, dict):
        print("suprec: config must be a JSON object", file=sys.stderr)
        return 2
    threads = max(1, args.threads)
    try:
        seed = _resolve_seed(args, config)
        columns, rows, comments = COMMANDS[args.command].run(config, seed, threads)
    except ConfigError as exc:
        print(f"suprec: config error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"suprec: resource cap: {exc}", file=sys.stderr)
        return 3
    _write_output(args.out, args.format, columns, rows, comments, args.command, seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
