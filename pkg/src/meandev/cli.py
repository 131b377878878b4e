"""Command-line front end: solve, sweep, measures and verify.

Problems are described by an INI-style config with one section per
component::

    [distribution]
    kind = uniform
    a = 0
    b = 10

    [deviation]
    kind = gini            ; gini | mean_absolute | range | inter_es_range
                           ; | es_deviation | sd

    [penalty]
    kind = linear_quadratic
    alpha = 0.5
    beta = 0.0

    [premium]
    kind = expected_value  ; expected_value | var | es
    theta = 0.2

    [budget]               ; optional premium cap
    cap = 3.0

    [sweep]                ; for the sweep subcommand
    parameter = distribution.b
    start = 1
    stop = 10
    steps = 50

Numbers in output tables use a fixed 9-significant-digit format so that runs
are reproducible byte for byte given the same config and seed.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bruteforce as bf
from . import contracts as ct
from . import premiums as pm
from . import solvers as sv
from .distributions import Empirical, Exponential, LossDistribution, Pareto, Uniform
from .errors import ConfigError, MeanDevError
from .measures import (
    ChoquetDeviation,
    DeviationMeasure,
    LinearQuadratic,
    LogPenalty,
    PenaltyFunction,
    StandardDeviationMeasure,
    check_monotonicity_constraint,
    es,
    es_deviation,
    full_range,
    gini,
    inter_es_range,
    md_g,
    mean_absolute,
    var,
)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_SOLVE = 2
EXIT_SWEEP_ALL_FAILED = 3

DEFAULT_SEED = 0xC0FFEE


def fmt(value) -> str:
    """Fixed 9-significant-digit decimal rendering for tables and reports."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.9g}"
    return str(value)


# ---------------------------------------------------------------------------
# Config parsing (line-number aware)
# ---------------------------------------------------------------------------


@dataclass
class ConfigValue:
    value: str
    line: int


class Config:
    """Parsed config: sections of key/value pairs with source line numbers."""

    def __init__(self, path: str):
        self.path = path
        self.sections: dict[str, dict[str, ConfigValue]] = {}
        current: dict[str, ConfigValue] | None = None
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc}") from exc
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith(("#", ";")):
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip().lower()
                if not name:
                    raise ConfigError(f"{path}:{lineno}: empty section name")
                current = self.sections.setdefault(name, {})
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            if current is None:
                raise ConfigError(f"{path}:{lineno}: key outside any [section]")
            key, _, value = line.partition("=")
            current[key.strip().lower()] = ConfigValue(value.split(";")[0].strip(), lineno)

    def section(self, name: str, required: bool = True) -> dict[str, ConfigValue] | None:
        sec = self.sections.get(name)
        if sec is None and required:
            raise ConfigError(f"{self.path}: missing required section [{name}]")
        return sec

    def get(self, section: str, key: str, default: str | None = None) -> ConfigValue:
        sec = self.section(section)
        if key not in sec:
            if default is not None:
                return ConfigValue(default, 0)
            raise ConfigError(f"{self.path}: section [{section}] is missing key '{key}'")
        return sec[key]

    def get_float(self, section: str, key: str, default: str | None = None) -> float:
        cv = self.get(section, key, default)
        try:
            return float(cv.value)
        except ValueError as exc:
            raise ConfigError(
                f"{self.path}:{cv.line}: value for '{key}' must be a number, got {cv.value!r}"
            ) from exc

    def get_int(self, section: str, key: str, default: str | None = None) -> int:
        cv = self.get(section, key, default)
        try:
            return int(cv.value)
        except ValueError as exc:
            raise ConfigError(
                f"{self.path}:{cv.line}: value for '{key}' must be an integer, got {cv.value!r}"
            ) from exc

    def override(self, dotted: str, value: float) -> None:
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"{self.path}: sweep parameter must be 'section.key', got {dotted!r}")
        sec = self.sections.setdefault(section.lower(), {})
        sec[key.lower()] = ConfigValue(repr(value), 0)


def _wrap(cv: ConfigValue, path: str, exc: Exception) -> ConfigError:
    return ConfigError(f"{path}:{cv.line}: {exc}")


def build_distribution(cfg: Config) -> LossDistribution:
    kind_cv = cfg.get("distribution", "kind")
    kind = kind_cv.value.lower()
    try:
        if kind == "uniform":
            return Uniform(cfg.get_float("distribution", "a", "0"), cfg.get_float("distribution", "b"))
        if kind == "exponential":
            return Exponential(cfg.get_float("distribution", "rate"))
        if kind == "pareto":
            return Pareto(cfg.get_float("distribution", "tail"), cfg.get_float("distribution", "scale", "1"))
        if kind == "empirical":
            vals_cv = cfg.get("distribution", "values")
            values = tuple(float(v) for v in vals_cv.value.split(","))
            return Empirical(values)
    except ConfigError:
        raise
    except (MeanDevError, ValueError) as exc:
        raise _wrap(kind_cv, cfg.path, exc) from exc
    raise ConfigError(f"{cfg.path}:{kind_cv.line}: unknown distribution kind {kind_cv.value!r}")


def build_deviation(cfg: Config) -> DeviationMeasure:
    kind_cv = cfg.get("deviation", "kind")
    kind = kind_cv.value.lower()
    try:
        if kind == "sd":
            return StandardDeviationMeasure()
        if kind == "gini":
            return ChoquetDeviation(gini())
        if kind == "mean_absolute":
            return ChoquetDeviation(mean_absolute())
        if kind == "range":
            return ChoquetDeviation(full_range())
        if kind == "inter_es_range":
            return ChoquetDeviation(inter_es_range(cfg.get_float("deviation", "level")))
        if kind == "es_deviation":
            return ChoquetDeviation(es_deviation(cfg.get_float("deviation", "level")))
    except ConfigError:
        raise
    except MeanDevError as exc:
        raise _wrap(kind_cv, cfg.path, exc) from exc
    raise ConfigError(f"{cfg.path}:{kind_cv.line}: unknown deviation kind {kind_cv.value!r}")


def build_penalty(cfg: Config) -> PenaltyFunction:
    kind_cv = cfg.get("penalty", "kind", "linear_quadratic")
    kind = kind_cv.value.lower()
    try:
        if kind == "linear_quadratic":
            return LinearQuadratic(cfg.get_float("penalty", "alpha"), cfg.get_float("penalty", "beta", "0"))
        if kind == "log":
            return LogPenalty()
    except ConfigError:
        raise
    except MeanDevError as exc:
        raise _wrap(kind_cv, cfg.path, exc) from exc
    raise ConfigError(f"{cfg.path}:{kind_cv.line}: unknown penalty kind {kind_cv.value!r}")


def build_premium(cfg: Config) -> pm.PremiumPrinciple:
    kind_cv = cfg.get("premium", "kind")
    kind = kind_cv.value.lower()
    try:
        if kind == "expected_value":
            return pm.ExpectedValue(cfg.get_float("premium", "theta"))
        if kind == "var":
            return pm.ValueAtRisk(cfg.get_float("premium", "p"))
        if kind == "es":
            return pm.ExpectedShortfall(cfg.get_float("premium", "p"))
    except ConfigError:
        raise
    except MeanDevError as exc:
        raise _wrap(kind_cv, cfg.path, exc) from exc
    raise ConfigError(f"{cfg.path}:{kind_cv.line}: unknown premium kind {kind_cv.value!r}")


def build_budget(cfg: Config) -> float | None:
    if cfg.section("budget", required=False) is None:
        return None
    return cfg.get_float("budget", "cap")


def solve_from_config(cfg: Config) -> sv.OptimalContract:
    X = build_distribution(cfg)
    deviation = build_deviation(cfg)
    g = build_penalty(cfg)
    principle = build_premium(cfg)
    budget = build_budget(cfg)

    if isinstance(principle, pm.ExpectedValue):
        if budget is not None:
            return sv.solve_budget_evpp(g, deviation, X, principle.loading, budget)
        if isinstance(deviation, StandardDeviationMeasure):
            return sv.solve_evpp_sd(g, X, principle.loading)
        return sv.solve_evpp_choquet(g, deviation.distortion, X, principle.loading)
    if isinstance(deviation, StandardDeviationMeasure):
        raise sv.DomainError("VaR/ES premium solvers require a Choquet deviation")
    name = "var" if isinstance(principle, pm.ValueAtRisk) else "es"
    if budget is not None:
        return sv.solve_budget_var_es(g, deviation.distortion, X, principle.level, budget, name)
    if name == "var":
        return sv.solve_var_premium(g, deviation.distortion, X, principle.level)
    return sv.solve_es_premium(g, deviation.distortion, X, principle.level)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _result_lines(result: sv.OptimalContract) -> list[str]:
    lines = []
    for k, v in ct.serialize_indemnity(result.contract).items():
        try:
            lines.append(f"{k} = {fmt(float(v))}")
        except ValueError:
            lines.append(f"{k} = {v}")
    lines.append(f"premium = {fmt(result.premium)}")
    lines.append(f"objective = {fmt(result.objective_value)}")
    lines.append(f"unique = {fmt(result.unique)}")
    if result.multipliers is not None:
        l1, l2 = result.multipliers
        if l1 is not None:
            lines.append(f"lambda1 = {fmt(float(l1))}")
        lines.append(f"lambda2 = {fmt(float(l2))}")
    diag = result.diagnostics
    if "binding" in diag:
        lines.append(f"binding = {fmt(bool(diag['binding']))}")
    if diag.get("note"):
        lines.append(f"note = {diag['note']}")
    for key in ("no_insurance", "iterations", "outer_iterations", "residual", "budget_residual"):
        if key in diag:
            val = diag[key]
            lines.append(f"{key} = {fmt(val) if isinstance(val, (bool, float, int)) else val}")
    return lines


def cmd_solve(args) -> int:
    cfg = Config(args.config)
    result = solve_from_config(cfg)
    _emit("\n".join(_result_lines(result)) + "\n", args.out)
    return EXIT_OK


def _threshold_columns(contract: ct.Indemnity) -> tuple[tuple[str, ...], tuple[float, ...]]:
    if isinstance(contract, ct.StopLoss):
        return ("d",), (contract.deductible,)
    if isinstance(contract, ct.DualTruncated):
        return ("d1", "d2"), (contract.lower_limit, contract.upper_deductible)
    if isinstance(contract, ct.ThreeThreshold):
        return ("d1", "d2", "d3"), (contract.d1, contract.d2, contract.d3)
    raise MeanDevError(f"unexpected contract form in sweep: {type(contract)!r}")


def cmd_sweep(args) -> int:
    cfg = Config(args.config)
    sweep = cfg.section("sweep")
    parameter = cfg.get("sweep", "parameter").value
    start = cfg.get_float("sweep", "start")
    stop = cfg.get_float("sweep", "stop")
    steps = cfg.get_int("sweep", "steps")
    if steps < 2:
        raise ConfigError(f"{cfg.path}: sweep needs at least 2 steps, got {steps}")
    axis = np.linspace(start, stop, steps)

    def run_step(value: float):
        step_cfg = Config(args.config)
        step_cfg.override(parameter, float(value))
        try:
            return solve_from_config(step_cfg)
        except MeanDevError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=min(8, steps)) as pool:
        results = list(pool.map(run_step, axis))

    header: list[str] | None = None
    rows = []
    failures = 0
    for value, res in zip(axis, results):
        if isinstance(res, Exception):
            failures += 1
            rows.append((value, None))
            continue
        names, thresholds = _threshold_columns(res.contract)
        if header is None:
            header = [parameter, *names, "premium", "objective"]
        rows.append((value, (thresholds, res.premium, res.objective_value)))
    if header is None:
        sys.stderr.write("sweep: every step failed\n")
        return EXIT_SWEEP_ALL_FAILED
    n_thresholds = len(header) - 3
    lines = [",".join(header)]
    for value, payload in rows:
        if payload is None:
            lines.append(",".join([fmt(float(value))] + ["ERROR"] * (len(header) - 1)))
            continue
        thresholds, paid, obj = payload
        cells = [fmt(float(value))]
        cells += [fmt(float(t)) for t in thresholds]
        cells += [""] * (n_thresholds - len(thresholds))
        cells += [fmt(float(paid)), fmt(float(obj))]
        lines.append(",".join(cells))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_measures(args) -> int:
    cfg = Config(args.config)
    X = build_distribution(cfg)
    deviation = build_deviation(cfg)
    g = build_penalty(cfg)
    lines = [
        f"mean = {fmt(X.mean())}",
        f"deviation = {fmt(deviation.evaluate(X))}",
        f"md_g = {fmt(md_g(g, deviation, X))}",
    ]
    msec = cfg.section("measures", required=False)
    if msec and "levels" in msec:
        levels = [float(v) for v in msec["levels"].value.split(",")]
        for p in levels:
            lines.append(f"var_{fmt(p)} = {fmt(var(X, p))}")
            lines.append(f"es_{fmt(p)} = {fmt(es(X, p))}")
    if isinstance(g, LinearQuadratic):
        lines.append(f"admissible = {fmt(check_monotonicity_constraint(g, deviation, X))}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = Config(args.config)
    X = build_distribution(cfg)
    deviation = build_deviation(cfg)
    g = build_penalty(cfg)
    principle = build_premium(cfg)
    budget = build_budget(cfg)
    n = 64
    samples = 10_000
    restarts = 4
    tolerance = 1e-6
    vsec = cfg.section("verify", required=False)
    if vsec:
        n = cfg.get_int("verify", "grid", str(n))
        samples = cfg.get_int("verify", "random", str(samples))
        restarts = cfg.get_int("verify", "restarts", str(restarts))
        tolerance = cfg.get_float("verify", "tolerance", repr(tolerance))

    result = solve_from_config(cfg)
    problem = bf.DiscretizedProblem.build(X, deviation, principle, n=n)
    rng = np.random.default_rng(args.seed)
    # slack bound: one grid cell times an estimate of the objective's threshold slope
    cell = float(np.max(problem.widths))
    if isinstance(principle, pm.ExpectedValue):
        rate = 1.0 + principle.loading
    else:
        rate = 1.0 / (1.0 - principle.level)
    dev_full = deviation.evaluate(X)
    slack = cell * (g.derivative(dev_full) + rate)
    tol_total = tolerance + slack

    lines = [f"solver_objective = {fmt(result.objective_value)}"]
    gaps = []
    for strategy in ("threshold_grid", "random_lipschitz", "coordinate_descent"):
        _, best = bf.search_contracts(
            problem, g, strategy=strategy, samples=samples, restarts=restarts,
            budget=budget, rng=rng,
        )
        gap = result.objective_value - best
        gaps.append(gap)
        lines.append(f"{strategy}_best = {fmt(best)}")
        lines.append(f"{strategy}_gap = {fmt(gap)}")
    max_gap = max(gaps)
    ok = max_gap <= tol_total
    lines.append(f"max_gap = {fmt(max_gap)}")
    lines.append(f"tolerance = {fmt(tol_total)}")
    lines.append(f"status = {'pass' if ok else 'fail'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_SOLVE


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meandev",
        description="Optimal insurance contracts under mean-deviation preferences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, desc in (
        ("solve", cmd_solve, "solve one contract problem and print the optimum"),
        ("sweep", cmd_sweep, "solve along a parameter axis and emit a CSV table"),
        ("measures", cmd_measures, "print deviation / mean-deviation / VaR / ES values"),
        ("verify", cmd_verify, "check the solver against brute-force contract search"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("config", help="path to the problem config file")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed for search")
        p.add_argument("--out", default=None, help="write output to this path instead of stdout")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_PARSE
    except MeanDevError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
