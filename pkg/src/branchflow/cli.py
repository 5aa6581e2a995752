"""Command-line experiment driver.

Subcommands::

    branchflow run            --config c.json [--seed S] [--threads N] [--out DIR]
    branchflow converge       --config c.json ...       beta / n_trees sweeps
    branchflow psi            --rule kpp [--scaling unit] [--beta-order K]
    branchflow validate-rule  --rule power-alpha --alpha 2.5
    branchflow lemma          --config c.json ...
    branchflow oracle         --config c.json ...       finite-difference solve
    branchflow residual       --config c.json ...       integral-equation check

Configs are JSON; every numeric tolerance an acceptance predicate uses must be
spelled out in the file.  Results land in the output directory as
``results.csv`` (columns x, t, beta, n_trees, estimate, stderr, oracle,
abs_error, within_3se, error) plus a key-value ``manifest.txt`` recording the
seed, the config echo, package versions and the wall time.  Re-running a
config with the same seed produces a byte-identical results CSV for any
``--threads`` value; the env var BRANCHFLOW_THREADS is the fallback when the
flag is omitted.

Exit codes: 0 success, 1 usage/config error, 2 an acceptance predicate in the
config failed.
"""

import argparse
import csv
import json
import math
import os
import platform
import sys
import time

import numpy as np
import scipy

from .calculus import ScalingMode, psi_limit, psi_series, series_lines, target_pde
from .engine import Domain, EngineConfig
from .errors import BranchflowError, ConfigError
from .estimators import TransformedInitial, estimate_field
from .functions import BoundaryData, SeparableField, initial_condition_from_dict
from .lemma import LemmaInstance, build_u_grid, check_identity, lemma_grid
from .pde import (Grid1D, heat_closed_form, integral_residual, solve_semilinear,
                  solve_cauchy)
from .rules import built_in_rule, load_rule, validate_rule

try:
    from importlib.metadata import version as _dist_version
    _VERSION = _dist_version("branchflow")
except Exception:   # not installed; running from a source tree
    _VERSION = "unknown"

RESULT_COLUMNS = ("x", "t", "beta", "n_trees", "estimate", "stderr", "oracle",
                  "abs_error", "within_3se", "error")


# ---------------------------------------------------------------- config


def load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            "config", f"{path} is not valid JSON (line {exc.lineno}, "
            f"column {exc.colno}): {exc.msg}") from exc


def _require(cfg, field):
    if field not in cfg:
        raise ConfigError(field, "required field is missing")
    return cfg[field]


def _number(cfg, field, default=None, minimum=None):
    value = cfg.get(field, default)
    if value is None:
        raise ConfigError(field, "required field is missing")
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {cfg[field]!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {value}")
    return value


def _int_list(cfg, field, minimum=1):
    raw = _require(cfg, field)
    values = raw if isinstance(raw, list) else [raw]
    out = []
    for v in values:
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            raise ConfigError(field, f"entries must be integers >= {minimum}, got {v!r}")
        out.append(v)
    if not out:
        raise ConfigError(field, "list must be nonempty")
    return out


def _float_list(cfg, field):
    raw = _require(cfg, field)
    values = raw if isinstance(raw, list) else [raw]
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(field, f"entries must be numbers, got {raw!r}") from None
    if not out:
        raise ConfigError(field, "list must be nonempty")
    return out


def parse_rule(cfg):
    spec = cfg.get("rule")
    if not isinstance(spec, dict):
        raise ConfigError("rule", "expected an object with 'name' or 'file'")
    try:
        if "file" in spec:
            return load_rule(spec["file"])
        name = spec.get("name")
        if name is None:
            raise ConfigError("rule", "needs 'name' or 'file'")
        alpha = spec.get("alpha")
        if alpha is not None and isinstance(alpha, str):
            from fractions import Fraction
            alpha = Fraction(alpha)
        return built_in_rule(name, alpha=alpha,
                             truncation=spec.get("truncation", 8))
    except ConfigError:
        raise
    except (BranchflowError, ValueError, OSError) as exc:
        raise ConfigError("rule", str(exc)) from exc


def parse_f(cfg, field="f"):
    spec = cfg.get(field)
    if spec is None:
        raise ConfigError(field, "required field is missing")
    try:
        return initial_condition_from_dict(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(field, str(exc)) from exc


def parse_g(cfg):
    spec = cfg.get("g")
    if spec is None:
        return None
    kind = spec.get("kind") if isinstance(spec, dict) else None
    if kind == "constant":
        value = _number(spec, "value")
        return BoundaryData(lambda t, x: value)
    if kind == "zero":
        return BoundaryData(lambda t, x: 0.0)
    raise ConfigError("g", f"unknown boundary data kind {kind!r} "
                           "(use 'constant' or 'zero', or omit)")


def parse_domain(cfg):
    spec = cfg.get("domain")
    if not isinstance(spec, dict):
        raise ConfigError("domain", "expected an object with 'horizon'")
    try:
        horizon = _number(spec, "horizon", minimum=1e-12)
    except ConfigError as exc:
        raise ConfigError("domain.horizon", exc.message) from None
    interval = spec.get("interval")
    if interval is not None:
        interval = tuple(_float_list(spec, "interval"))
        if len(interval) != 2 or not interval[0] < interval[1]:
            raise ConfigError("domain.interval", "expected [a, b] with a < b")
    try:
        return Domain(horizon=horizon, interval=interval)
    except ValueError as exc:
        raise ConfigError("domain", str(exc)) from exc


def parse_points(cfg):
    spec = cfg.get("points")
    if isinstance(spec, dict):
        start = _number(spec, "start")
        stop = _number(spec, "stop")
        step = _number(spec, "step", minimum=1e-12)
        n = int(round((stop - start) / step))
        pts = [start + i * step for i in range(n + 1)]
    elif isinstance(spec, list) and spec:
        pts = [float(v) for v in spec]
    else:
        raise ConfigError("points", "expected a nonempty list or "
                                    "{start, stop, step}")
    return pts


def parse_scaling(cfg):
    try:
        return ScalingMode.parse(cfg.get("scaling", "scaling1"))
    except ValueError as exc:
        raise ConfigError("scaling", str(exc)) from exc


def resolve_threads(args, cfg):
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    env = os.environ.get("BRANCHFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("threads",
                              f"BRANCHFLOW_THREADS={env!r} is not an integer")
    value = cfg.get("threads", 1)
    if not isinstance(value, int) or value < 1:
        raise ConfigError("threads", f"must be a positive integer, got {value!r}")
    return value


def resolve_seed(args, cfg):
    if getattr(args, "seed", None) is not None:
        return args.seed
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"must be a nonnegative integer, got {seed!r}")
    return seed


def resolve_out(args, cfg):
    out = getattr(args, "out", None) or cfg.get("out") or "branchflow-out"
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------- oracles


def build_oracle(cfg, rule, scaling, f, horizon, points):
    """Return oracle(x, beta) -> float or None, per the config's oracle block.

    ``initial_data = "limit"`` compares against the beta -> 0 target PDE with
    raw data f; ``"transformed"`` against the finite-beta estimand (data
    (1-e^{-beta f})/beta or sinh(beta f)/beta).  The PDE always comes from the
    rule through the symbolic calculus, never from a hard-coded formula.
    """
    spec = cfg.get("oracle") or {}
    kind = spec.get("kind", "none")
    if kind == "none":
        return None
    initial = spec.get("initial_data", "limit")
    if initial not in ("limit", "transformed"):
        raise ConfigError("oracle.initial_data", f"unknown value {initial!r}")

    def data_for(beta):
        if initial == "limit":
            return f
        return TransformedInitial(f, beta, scaling)

    if kind == "closed-form":
        def oracle(x, beta):
            return heat_closed_form(x, horizon, data_for(beta))
        return oracle
    if kind == "fd":
        dx = _number(spec, "dx", default=0.0125, minimum=1e-6)
        dt = _number(spec, "dt", default=2e-3, minimum=1e-9)
        try:
            pde = target_pde(rule, scaling)
        except BranchflowError as exc:
            raise ConfigError("oracle", f"no target PDE for this rule/scaling: {exc}")
        cache = {}

        def oracle(x, beta):
            if beta not in cache:
                cache[beta] = solve_cauchy(pde, data_for(beta), horizon,
                                           points, dx=dx, dt=dt)
            return cache[beta].final(x)
        return oracle
    raise ConfigError("oracle.kind", f"unknown value {kind!r} "
                                     "(use none, closed-form or fd)")


# ---------------------------------------------------------------- output


def write_results_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([row.get(c, "") for c in RESULT_COLUMNS])


def _fmt(value):
    return repr(float(value))


def write_manifest(path, cfg, seed, threads, wall, extra=None):
    lines = {
        "tool": "branchflow",
        "version": _VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": seed,
        "threads": threads,
        "wall_time_s": f"{wall:.3f}",
        "config": json.dumps(cfg, sort_keys=True),
    }
    if extra:
        lines.update(extra)
    with open(path, "w") as fh:
        for key, value in lines.items():
            fh.write(f"{key} = {value}\n")


# ---------------------------------------------------------------- MC table


def _mc_rows(cfg, rule, scaling, f, g, domain, points, betas, trees_list,
             seed, threads, oracle):
    rows = []
    for beta in betas:
        for n_trees in trees_list:
            config = EngineConfig(
                rule=rule, beta=beta, domain=domain, seed=seed,
                max_population=int(cfg.get("max_population", 1_000_000)),
                boundary_step=_number(cfg, "boundary_step", default=0.01,
                                      minimum=1e-9),
                max_deriv_order=int(cfg.get("max_deriv_order", 2)),
            )
            field = estimate_field(points, config, f, g, mode=scaling,
                                   n_trees=n_trees,
                                   log_mode=bool(cfg.get("log_mode", False)),
                                   threads=threads)
            for point in field:
                row = {"x": _fmt(point.x), "t": _fmt(domain.horizon),
                       "beta": _fmt(beta), "n_trees": n_trees}
                if point.error is not None:
                    row.update(estimate="", stderr="", oracle="",
                               abs_error="", within_3se="", error=point.error)
                    rows.append(row)
                    continue
                res = point.result
                row.update(estimate=_fmt(res.estimate),
                           stderr=_fmt(res.stderr), error="")
                if oracle is not None:
                    want = oracle(point.x, beta)
                    err = abs(res.estimate - want)
                    row.update(oracle=_fmt(want), abs_error=_fmt(err),
                               within_3se=int(err <= 3.0 * res.stderr))
                else:
                    row.update(oracle="", abs_error="", within_3se="")
                rows.append(row)
    return rows


def _apply_acceptance(cfg, rows):
    """Evaluate the config's acceptance block; return (ok, messages)."""
    acc = cfg.get("acceptance")
    if not acc:
        return True, []
    problems = []
    scored = [r for r in rows if r.get("estimate") != ""]
    failed = [r for r in rows if r.get("error")]
    for row in failed:
        problems.append(f"row x={row['x']} beta={row['beta']}: {row['error']}")
    if acc.get("require_within_3se"):
        for row in scored:
            if row.get("within_3se") == 0:
                problems.append(
                    f"x={row['x']} beta={row['beta']}: |estimate - oracle| "
                    f"= {row['abs_error']} > 3*stderr")
    if "max_abs_error" in acc:
        tol = _number(acc, "max_abs_error", minimum=0.0)
        for row in scored:
            if row.get("abs_error") != "" and float(row["abs_error"]) > tol:
                problems.append(
                    f"x={row['x']} beta={row['beta']}: abs_error "
                    f"{row['abs_error']} > {tol}")
    if "max_stderr" in acc:
        tol = _number(acc, "max_stderr", minimum=0.0)
        for row in scored:
            if float(row["stderr"]) > tol:
                problems.append(
                    f"x={row['x']} beta={row['beta']}: stderr "
                    f"{row['stderr']} > {tol}")
    return not problems, problems


# ---------------------------------------------------------------- commands


def cmd_run(args):
    cfg = load_config(args.config)
    mode = cfg.get("mode", "field")
    if mode not in ("point", "field"):
        raise ConfigError("mode", f"'run' handles point/field, got {mode!r}")
    rule = parse_rule(cfg)
    scaling = parse_scaling(cfg)
    f = parse_f(cfg)
    g = parse_g(cfg)
    domain = parse_domain(cfg)
    points = parse_points(cfg)
    if mode == "point" and len(points) != 1:
        raise ConfigError("points", "mode=point needs exactly one point")
    betas = _float_list(cfg, "beta")
    for beta in betas:
        if beta <= 0:
            raise ConfigError("beta", f"entries must be positive, got {beta}")
    trees_list = _int_list(cfg, "n_trees", minimum=1)
    seed = resolve_seed(args, cfg)
    threads = resolve_threads(args, cfg)
    out = resolve_out(args, cfg)
    oracle = build_oracle(cfg, rule, scaling, f, domain.horizon, points)

    start = time.perf_counter()
    rows = _mc_rows(cfg, rule, scaling, f, g, domain, points, betas,
                    trees_list, seed, threads, oracle)
    wall = time.perf_counter() - start
    write_results_csv(os.path.join(out, "results.csv"), rows)
    ok, problems = _apply_acceptance(cfg, rows)
    write_manifest(os.path.join(out, "manifest.txt"), cfg, seed, threads, wall,
                   extra={"rows": len(rows),
                          "acceptance": "pass" if ok else "FAIL"})
    for line in problems:
        print(f"acceptance: {line}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {os.path.join(out, 'results.csv')}")
    return 0 if ok else 2


def _fit_slope(xs, ys):
    lx = [math.log(v) for v in xs]
    ly = [math.log(v) for v in ys]
    n = len(lx)
    sx, sy = sum(lx), sum(ly)
    sxx = sum(v * v for v in lx)
    sxy = sum(a * b for a, b in zip(lx, ly))
    denom = n * sxx - sx * sx
    return (n * sxy - sx * sy) / denom


def cmd_converge(args):
    cfg = load_config(args.config)
    mode = cfg.get("mode", "converge-beta")
    if mode not in ("converge-beta", "converge-n"):
        raise ConfigError("mode", f"'converge' handles converge-beta/"
                                  f"converge-n, got {mode!r}")
    rule = parse_rule(cfg)
    scaling = parse_scaling(cfg)
    f = parse_f(cfg)
    g = parse_g(cfg)
    domain = parse_domain(cfg)
    points = parse_points(cfg)
    betas = _float_list(cfg, "beta")
    trees_list = _int_list(cfg, "n_trees", minimum=1)
    if mode == "converge-beta":
        if len(betas) < 3:
            raise ConfigError("beta", "converge-beta needs at least 3 values")
        if any(b1 <= b2 for b1, b2 in zip(betas, betas[1:])):
            raise ConfigError("beta", "values must be strictly descending")
        trees_list = trees_list[:1]
    else:
        if len(trees_list) < 3:
            raise ConfigError("n_trees", "converge-n needs at least 3 values")
        betas = betas[:1]
    seed = resolve_seed(args, cfg)
    threads = resolve_threads(args, cfg)
    out = resolve_out(args, cfg)
    oracle = build_oracle(cfg, rule, scaling, f, domain.horizon, points)
    if oracle is None:
        raise ConfigError("oracle", "convergence sweeps need an oracle "
                                    "(kind closed-form or fd)")

    start = time.perf_counter()
    rows = _mc_rows(cfg, rule, scaling, f, g, domain, points, betas,
                    trees_list, seed, threads, oracle)
    wall = time.perf_counter() - start
    write_results_csv(os.path.join(out, "results.csv"), rows)

    extra = {}
    sweep = betas if mode == "converge-beta" else trees_list
    key = "beta" if mode == "converge-beta" else "n_trees"
    for i, x in enumerate(points):
        errs = []
        for value in sweep:
            match = [r for r in rows
                     if r["x"] == _fmt(x) and r.get("abs_error") != ""
                     and (float(r["beta"]) == value if key == "beta"
                          else r["n_trees"] == value)]
            if match:
                errs.append(max(1e-300, float(match[0]["abs_error"])))
        if len(errs) == len(sweep):
            slope = _fit_slope(sweep, errs)
            extra[f"slope_x{i}"] = f"{slope:.4f} (x={x})"
            print(f"x={x}: fitted |error| ~ {key}^{slope:.3f}")
    ok, problems = _apply_acceptance(cfg, rows)
    acc = cfg.get("acceptance") or {}
    if "slope_min" in acc or "slope_max" in acc:
        lo = _number(acc, "slope_min", default=-math.inf)
        hi = _number(acc, "slope_max", default=math.inf)
        for label, text in extra.items():
            slope = float(text.split()[0])
            if not lo <= slope <= hi:
                ok = False
                problems.append(f"{label}: slope {slope:.3f} outside "
                                f"[{lo}, {hi}]")
    write_manifest(os.path.join(out, "manifest.txt"), cfg, seed, threads, wall,
                   extra={**extra, "acceptance": "pass" if ok else "FAIL"})
    for line in problems:
        print(f"acceptance: {line}", file=sys.stderr)
    return 0 if ok else 2


def _rule_from_flags(args, cfg):
    if cfg:
        return parse_rule(cfg)
    if args.rule is None:
        raise ConfigError("rule", "pass --rule NAME or --config FILE")
    alpha = args.alpha
    if alpha is not None:
        from fractions import Fraction
        alpha = Fraction(alpha)
    try:
        if os.path.exists(args.rule):
            return load_rule(args.rule)
        return built_in_rule(args.rule, alpha=alpha,
                             truncation=args.truncation)
    except (BranchflowError, ValueError) as exc:
        raise ConfigError("rule", str(exc)) from exc


def cmd_psi(args):
    cfg = load_config(args.config) if args.config else None
    rule = _rule_from_flags(args, cfg)
    scaling = (parse_scaling(cfg) if cfg
               else ScalingMode.parse(args.scaling))
    order = cfg.get("beta_order", args.beta_order) if cfg else args.beta_order
    series = psi_series(rule, scaling, order=order)
    lines = series_lines(series)
    print(f"rule: {rule.name or '(unnamed)'}   scaling: {scaling.value}")
    for line in lines:
        print(f"  {line}")
    try:
        pde = psi_limit(series)
        print(f"psi = {pde.psi_str()}")
        print(pde.equation_str())
    except BranchflowError as exc:
        print(f"beta -> 0 limit: {exc}")
    if args.out or (cfg and cfg.get("out")):
        out = resolve_out(args, cfg or {})
        with open(os.path.join(out, "psi.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_validate_rule(args):
    cfg = load_config(args.config) if args.config else None
    try:
        rule = _rule_from_flags(args, cfg)
    except ConfigError as exc:
        # construction itself can reject (e.g. weight positivity for alpha > 2)
        print(f"invalid rule: {exc}", file=sys.stderr)
        return 1
    report = validate_rule(rule)
    print(report)
    return 0 if report.ok else 1


def cmd_lemma(args):
    cfg = load_config(args.config)
    if cfg.get("mode", "lemma") != "lemma":
        raise ConfigError("mode", f"'lemma' expects mode=lemma, got {cfg.get('mode')!r}")
    g = parse_f(cfg, "g")
    phi_cfg = cfg.get("phi")
    phi = None
    if phi_cfg is not None:
        phi_cfg = dict(phi_cfg)
        decay = float(phi_cfg.pop("decay", 0.0))
        power = int(phi_cfg.pop("power", 0))
        try:
            spatial = initial_condition_from_dict(phi_cfg)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("phi", str(exc)) from exc
        phi = SeparableField(spatial, decay=decay, power=power)
    horizon = _number(cfg, "horizon", minimum=1e-12)
    probes_raw = cfg.get("probes")
    if not isinstance(probes_raw, list) or not probes_raw:
        raise ConfigError("probes", "expected a nonempty list of [x, t] pairs")
    probes = tuple((float(x), float(t)) for x, t in probes_raw)
    ks = _float_list(cfg, "k")
    grid_cfg = cfg.get("grid") or {}
    dx = _number(grid_cfg, "dx", default=0.05, minimum=1e-6)
    dt = _number(grid_cfg, "dt", default=0.005, minimum=1e-9)
    n_grid = int(cfg.get("n_grid_paths", 20_000))
    n_check = int(cfg.get("n_check_paths", 100_000))
    seed = resolve_seed(args, cfg)
    out = resolve_out(args, cfg)

    start = time.perf_counter()
    all_rows = []
    all_ok = True
    for k in ks:
        inst = LemmaInstance(k=k, g=g, phi=phi, horizon=horizon, probes=probes)
        grid = lemma_grid(inst, dx=dx, dt=dt)
        u_grid = build_u_grid(inst, grid, n_grid, seed=seed)
        report = check_identity(inst, u_grid, n_check, seed=seed + 1)
        print(f"k = {k}:")
        print(report)
        all_ok = all_ok and report.all_ok
        for row in report.rows:
            all_rows.append((k, row))
    wall = time.perf_counter() - start

    with open(os.path.join(out, "lemma.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "probe_x", "probe_t", "lhs", "rhs", "diff",
                         "stderr", "bias", "ok"])
        for k, row in all_rows:
            writer.writerow([repr(float(k)), repr(row.x), repr(row.t),
                             repr(row.lhs), repr(row.rhs), repr(row.diff),
                             repr(row.stderr), repr(row.bias), int(row.ok)])
    write_manifest(os.path.join(out, "manifest.txt"), cfg, seed, 1, wall,
                   extra={"identity": "pass" if all_ok else "FAIL"})
    acc = cfg.get("acceptance") or {}
    if acc.get("require_all_ok") and not all_ok:
        print("acceptance: identity check failed at some probe", file=sys.stderr)
        return 2
    return 0


def _pde_for(cfg, rule, scaling):
    try:
        return target_pde(rule, scaling)
    except BranchflowError as exc:
        raise ConfigError("rule", f"no target PDE for this rule/scaling: {exc}")


def cmd_oracle(args):
    cfg = load_config(args.config)
    rule = parse_rule(cfg)
    scaling = parse_scaling(cfg)
    f = parse_f(cfg)
    domain = parse_domain(cfg)
    points = parse_points(cfg)
    spec = cfg.get("oracle") or {}
    dx = _number(spec, "dx", default=0.0125, minimum=1e-6)
    dt = _number(spec, "dt", default=2e-3, minimum=1e-9)
    initial = spec.get("initial_data", "limit")
    beta = _float_list(cfg, "beta")[0] if "beta" in cfg else 1.0
    data = f if initial == "limit" else TransformedInitial(f, beta, scaling)
    pde = _pde_for(cfg, rule, scaling)
    seed = resolve_seed(args, cfg)
    out = resolve_out(args, cfg)

    start = time.perf_counter()
    if domain.bounded:
        nx = max(3, int(round((domain.interval[1] - domain.interval[0]) / dx)) + 1)
        nt = max(1, int(round(domain.horizon / dt)))
        g = parse_g(cfg)
        grid = Grid1D(domain.interval, domain.horizon, nx, nt)
        solution = solve_semilinear(pde, data, g, grid)
    else:
        solution = solve_cauchy(pde, data, domain.horizon, points, dx=dx, dt=dt)
    wall = time.perf_counter() - start
    solution.to_csv(os.path.join(out, "solution.csv"))
    write_manifest(os.path.join(out, "manifest.txt"), cfg, seed, 1, wall,
                   extra={"psi": pde.psi_str(), "equation": pde.equation_str()})
    print(pde.equation_str())
    for x in points:
        print(f"u({x}, t={domain.horizon}) = {solution.final(x)!r}")
    return 0


def cmd_residual(args):
    cfg = load_config(args.config)
    rule = parse_rule(cfg)
    scaling = parse_scaling(cfg)
    f = parse_f(cfg)
    domain = parse_domain(cfg)
    points = parse_points(cfg)
    spec = cfg.get("oracle") or {}
    dx = _number(spec, "dx", default=0.0125, minimum=1e-6)
    dt = _number(spec, "dt", default=2e-3, minimum=1e-9)
    n_paths = int(cfg.get("n_paths", 20_000))
    pde = _pde_for(cfg, rule, scaling)
    seed = resolve_seed(args, cfg)
    out = resolve_out(args, cfg)

    start = time.perf_counter()
    solution = solve_cauchy(pde, f, domain.horizon, points, dx=dx, dt=dt)
    report = integral_residual(solution, pde, f, n_paths, probes=points,
                               seed=seed)
    wall = time.perf_counter() - start
    print(report)
    with open(os.path.join(out, "residual.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "u", "poisson", "green", "residual", "stderr"])
        for row in report.rows:
            writer.writerow([repr(row.x), repr(row.u_value), repr(row.poisson),
                             repr(row.green), repr(row.residual),
                             repr(row.stderr)])
    write_manifest(os.path.join(out, "manifest.txt"), cfg, seed, 1, wall,
                   extra={"max_residual": repr(report.max_residual)})
    acc = cfg.get("acceptance") or {}
    if "max_residual" in acc:
        tol = _number(acc, "max_residual", minimum=0.0)
        if report.max_residual > tol:
            print(f"acceptance: max residual {report.max_residual:.3g} > {tol}",
                  file=sys.stderr)
            return 2
    return 0


# ---------------------------------------------------------------- entry


def build_parser():
    parser = argparse.ArgumentParser(
        prog="branchflow",
        description="Branching-diffusion Monte Carlo for semilinear PDEs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (fallback: BRANCHFLOW_THREADS)")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("run", help="Monte Carlo point/field estimates")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge", help="beta or n_trees convergence sweep")
    common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("psi", help="print a rule's nonlinearity expansion")
    common(p, config_required=False)
    p.add_argument("--rule", help="built-in rule name or rule file")
    p.add_argument("--alpha", help="exponent for power-alpha (e.g. 3/2)")
    p.add_argument("--truncation", type=int, default=8)
    p.add_argument("--scaling", default="unit",
                   help="unit, scaling1 or scaling2")
    p.add_argument("--beta-order", type=int, default=4,
                   help="series truncation order in beta")
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser("validate-rule", help="check a rule's admissibility")
    common(p, config_required=False)
    p.add_argument("--rule", help="built-in rule name or rule file")
    p.add_argument("--alpha", help="exponent for power-alpha")
    p.add_argument("--truncation", type=int, default=8)
    p.set_defaults(func=cmd_validate_rule)

    p = sub.add_parser("lemma", help="verify the exponential-clock identity")
    common(p)
    p.set_defaults(func=cmd_lemma)

    p = sub.add_parser("oracle", help="finite-difference reference solve")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("residual", help="integral-equation residual check")
    common(p)
    p.set_defaults(func=cmd_residual)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BranchflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
