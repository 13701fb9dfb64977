"""Command-line front end: load sweeps over the closed-form model, the
collision-only baseline, and the simulator; breaking-point search; and
the oracle-vs-closed-form validation table.

Rates cross the CLI boundary in attempts per second and are divided by
1000 exactly once at ingestion; everything downstream runs per subframe.
Exit codes: 0 ok, 1 usage, 2 validation failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import io
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import model, oracles, sim
from .config import SystemConfig, load_config

ENGINE_ORDER = ("model", "baseline", "sim")

CSV_COLUMNS = (
    "lambda_i_per_s", "engine", "p_outage", "n_tx", "p_c", "p_e",
    "lambda_t", "rho", "ci_low", "ci_high", "converged",
)

WORKERS_ENV = "RACHCAP_WORKERS"


@dataclass(frozen=True)
class SweepSpec:
    """One sweep request.  grid is in attempts per second."""

    grid: tuple
    cfg: SystemConfig
    engines: tuple = ("model",)
    n_reps: int = 5
    seed: int = 1
    duration: int = 60_000  # subframes per simulation run

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("empty lambda grid")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        if self.grid[0] < 0:
            raise ValueError("lambda grid must be nonnegative")
        if not self.engines:
            raise ValueError("no engines selected")
        for e in self.engines:
            if e not in ENGINE_ORDER:
                raise ValueError(f"unknown engine {e!r}")
        if "sim" in self.engines:
            if self.n_reps < 2:
                raise ValueError("sim sweeps need n_reps >= 2")
            if self.duration < 100:
                raise ValueError("sim sweeps need duration >= 100 subframes")


@dataclass(frozen=True)
class SweepRow:
    lambda_i_per_s: float
    engine: str
    p_outage: float
    n_tx: float
    p_c: float
    p_e: float
    lambda_t: float  # attempts per second
    rho: float
    ci_low: float | None = None   # 95% CI on p_outage, sim only
    ci_high: float | None = None
    converged: bool | None = None  # model engines only


def _model_row(lam_s: float, engine: str, res: model.ModelResult) -> SweepRow:
    return SweepRow(
        lambda_i_per_s=lam_s,
        engine=engine,
        p_outage=res.p_outage,
        n_tx=res.n_tx,
        p_c=res.p_c,
        p_e=res.p_e,
        lambda_t=res.load.lambda_t * 1000.0,
        rho=res.rho,
        converged=res.converged,
    )


def _sim_point(args) -> sim.ReplicatedStats:
    cfg, duration, seed, idx, lam_sf, n_reps = args
    sim_cfg = sim.SimConfig(system=cfg, duration=duration, seed=(seed, idx))
    return sim.run_replications(sim_cfg, lam_sf, n_reps)


def _sim_row(lam_s: float, cfg: SystemConfig, reps: sim.ReplicatedStats) -> SweepRow:
    outage = reps.metrics["outage_fraction"]
    return SweepRow(
        lambda_i_per_s=lam_s,
        engine="sim",
        p_outage=outage.mean,
        n_tx=reps.metrics["mean_tx"].mean,
        p_c=reps.metrics["attempt_collision_fraction"].mean,
        p_e=reps.metrics["attempt_grant_drop_fraction"].mean,
        lambda_t=reps.metrics["lambda_t_observed"].mean * 1000.0,
        rho=reps.metrics["lambda_a_observed"].mean / cfg.mu,
        ci_low=outage.ci_low,
        ci_high=outage.ci_high,
    )


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_sweep(spec: SweepSpec, progress=None) -> list[SweepRow]:
    """Evaluate every selected engine at every grid point.  Rows come
    back ordered by grid index, then model, baseline, sim."""
    sim_results: dict[int, sim.ReplicatedStats] = {}
    if "sim" in spec.engines:
        tasks = [
            (spec.cfg, spec.duration, spec.seed, idx, lam / 1000.0, spec.n_reps)
            for idx, lam in enumerate(spec.grid)
        ]
        workers = _workers()
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for idx, reps in enumerate(pool.map(_sim_point, tasks)):
                    sim_results[idx] = reps
                    if progress:
                        progress(f"sim {idx + 1}/{len(tasks)} done")
        else:
            for idx, task in enumerate(tasks):
                sim_results[idx] = _sim_point(task)
                if progress:
                    progress(f"sim {idx + 1}/{len(tasks)} done")

    rows: list[SweepRow] = []
    for idx, lam_s in enumerate(spec.grid):
        lam_sf = lam_s / 1000.0
        for engine in ENGINE_ORDER:
            if engine not in spec.engines:
                continue
            if engine == "model":
                rows.append(_model_row(
                    lam_s, engine, model.solve_total_rate(lam_sf, spec.cfg)))
            elif engine == "baseline":
                rows.append(_model_row(
                    lam_s, engine, model.baseline_collision_only(lam_sf, spec.cfg)))
            else:
                rows.append(_sim_row(lam_s, spec.cfg, sim_results[idx]))
    return rows


def _fmt(value, null: str) -> str:
    if value is None:
        return null
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    return format(float(value), ".9g")


def format_rows(rows: list[SweepRow], style: str = "csv") -> str:
    """Render sweep rows as CSV (empty-string nulls) or as
    whitespace-separated plot data (nan nulls, booleans as 1/0)."""
    if style == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, c), "") for c in CSV_COLUMNS])
        return buf.getvalue()
    if style == "plot":
        lines = ["# " + " ".join(CSV_COLUMNS)]
        for r in rows:
            vals = []
            for c in CSV_COLUMNS:
                v = getattr(r, c)
                if isinstance(v, bool):
                    vals.append("1" if v else "0")
                elif v is None:
                    vals.append("nan")
                elif isinstance(v, str):
                    vals.append(v)
                else:
                    vals.append(format(float(v), ".9g"))
            lines.append(" ".join(vals))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown style {style!r}")


@dataclass(frozen=True)
class BreakingPoint:
    engine: str
    lambda_star: float | None  # attempts per second
    refined: str               # "bisection", "grid", or "none"
    message: str = ""


def _analytic_outage(lam_s: float, cfg: SystemConfig, engine: str) -> float:
    solver = (model.solve_total_rate if engine == "model"
              else model.baseline_collision_only)
    return solver(lam_s / 1000.0, cfg).p_outage


def breaking_point(
    spec: SweepSpec,
    threshold: float = 0.1,
    rows: list[SweepRow] | None = None,
) -> dict[str, BreakingPoint]:
    """Smallest offered load whose outage reaches the threshold.

    Analytic engines are refined by bisection between the bracketing
    grid points to 1 attempt/s; the sim engine reports the first
    crossing grid point as-is.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    if rows is None:
        rows = run_sweep(spec)
    result: dict[str, BreakingPoint] = {}
    for engine in ENGINE_ORDER:
        if engine not in spec.engines:
            continue
        series = [(r.lambda_i_per_s, r.p_outage)
                  for r in rows if r.engine == engine]
        cross = next((i for i, (_, p) in enumerate(series)
                      if p >= threshold), None)
        if cross is None:
            result[engine] = BreakingPoint(
                engine, None, "none", "no crossing in grid")
            continue
        if engine == "sim":
            result[engine] = BreakingPoint(engine, series[cross][0], "grid")
            continue
        lo = series[cross - 1][0] if cross > 0 else 0.0
        hi = series[cross][0]
        while hi - lo > 1.0:
            mid = 0.5 * (lo + hi)
            if _analytic_outage(mid, spec.cfg, engine) >= threshold:
                hi = mid
            else:
                lo = mid
        result[engine] = BreakingPoint(engine, hi, "bisection")
    return result


# ---------------------------------------------------------------------------
# validation suite


@dataclass(frozen=True)
class CheckResult:
    name: str
    observed: float
    tolerance: float
    passed: bool
    detail: str = ""


def validate(grant_drop_fn=None, seed: int = 12345) -> list[CheckResult]:
    """Run every oracle against its closed form and report the worst
    deviation per check.

    grant_drop_fn overrides the queue-loss closed form under test; the
    hook exists so a deliberately perturbed formula can demonstrate that
    exactly the queue check catches it.
    """
    checks: list[CheckResult] = []
    drop_fn = grant_drop_fn or model.grant_drop_probability

    # retry chain vs stationary linear system
    worst = 0.0
    worst_id = 0.0
    for p_f in (0.0, 0.3, 0.6, 0.9):
        for p_on in (0.01, 0.5):
            for m in (0, 2, 9):
                for w_c in (1, 5, 20):
                    cfg = SystemConfig(m=m, w_c=w_c)
                    closed = model.chain_steady_state(p_f, p_on, cfg)
                    solved = oracles.chain_linear_solve(p_f, p_on, m, w_c)
                    diff = max(
                        abs(closed.b_off - solved.b_off),
                        abs(closed.b_connect - solved.b_connect),
                        abs(closed.b_drop - solved.b_drop),
                        float(np.abs(closed.b - solved.b).max()),
                    )
                    worst = max(worst, diff)
                    worst_id = max(worst_id, abs(
                        closed.outage() - p_f ** (m + 1)))
    checks.append(CheckResult(
        "chain_closed_form_vs_linear_solve", worst, 1e-9, worst <= 1e-9,
        "max componentwise |closed - solved| over the parameter grid"))
    checks.append(CheckResult(
        "chain_outage_identity", worst_id, 1e-12, worst_id <= 1e-12,
        "max |b_drop/(b_drop+b_connect) - p_f^(m+1)|"))

    # grant-queue loss formula vs customer-by-customer simulation
    cfg = SystemConfig()
    lambda_a = 0.9 * cfg.mu
    est = oracles.impatient_queue_sim(
        lambda_a, cfg.mu, cfg.t_rar, "exponential",
        horizon=20_000_000, seed=seed)
    formula = drop_fn(lambda_a, cfg)
    rel = abs(formula - est.loss_fraction) / est.loss_fraction
    checks.append(CheckResult(
        "grant_drop_vs_queue_sim", rel, 0.05, rel <= 0.05,
        f"rho=0.9: formula {formula:.6g} vs simulated "
        f"{est.loss_fraction:.6g} (se {est.std_error:.2g})"))

    # collision bound direction and activation match
    worst_sigma = -np.inf
    worst_act = 0.0
    for nu in (5.0, 10.0, 20.0, 40.0):
        mc = oracles.preamble_monte_carlo(nu, cfg.d, 100_000, seed)
        bound = model.collision_probability(nu / cfg.delta_rao, cfg)
        excess = (mc.collision_prob - bound) / mc.collision_se
        worst_sigma = max(worst_sigma, excess)
        expected = model.activated_preamble_rate(
            nu / cfg.delta_rao, cfg) * cfg.delta_rao
        z = abs(mc.mean_activated - expected) / mc.activated_se
        worst_act = max(worst_act, z)
    checks.append(CheckResult(
        "collision_bound_direction", worst_sigma, 3.0, worst_sigma <= 3.0,
        "max (estimate - bound)/se over per-opportunity loads 5..40"))
    checks.append(CheckResult(
        "activation_count_match", worst_act, 3.0, worst_act <= 3.0,
        "max |estimate - expected|/se over the same loads"))

    # fixed point: damped iteration vs bracketing bisection
    worst_fp = 0.0
    for delta_rao, lams in ((5, (0.5, 1.5, 2.0, 2.4)), (1, (1.0, 2.0, 2.9))):
        fp_cfg = SystemConfig(delta_rao=delta_rao)
        for lam in lams:
            picard = model.solve_total_rate(
                lam, fp_cfg, rel_tol=1e-6).load.lambda_t
            root = oracles.fixed_point_bisection(lam, fp_cfg)
            worst_fp = max(worst_fp, abs(picard - root) / root)
    checks.append(CheckResult(
        "fixed_point_picard_vs_bisection", worst_fp, 0.005, worst_fp <= 0.005,
        "max relative disagreement below the breaking point"))
    return checks


def format_validation(checks: list[CheckResult]) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'observed':>12}  {'tolerance':>10}  status"]
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        lines.append(
            f"{c.name:<{width}}  {c.observed:>12.4g}  {c.tolerance:>10.4g}  "
            f"{status}")
        if c.detail:
            lines.append(f"{'':<{width}}    {c.detail}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CLI plumbing


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_CFG_FLAGS = (
    ("--d", "d"), ("--delta-rao", "delta_rao"), ("--m", "m"),
    ("--mu", "mu"), ("--w-c", "w_c"), ("--t-rar", "t_rar"),
    ("--t-crt", "t_crt"), ("--t-enb-proc", "t_enb_proc"),
    ("--t-ue-proc", "t_ue_proc"),
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH",
                   help="flat key=value file of system parameters")
    for flag, dest in _CFG_FLAGS:
        p.add_argument(flag, dest=dest, type=int, default=None)


def _add_sweep_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-min", type=float, default=100.0,
                   help="grid start, attempts/s")
    p.add_argument("--lambda-max", type=float, default=3000.0,
                   help="grid end, attempts/s")
    p.add_argument("--lambda-steps", type=int, default=30)
    p.add_argument("--engines", default="model",
                   help="comma list from model,baseline,sim")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--duration-s", type=float, default=60.0,
                   help="simulated seconds per sim run")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--plot-data", action="store_true",
                   help="whitespace-separated output instead of CSV")


def _build_cfg(args) -> SystemConfig:
    cfg = SystemConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {dest: getattr(args, dest)
                 for _, dest in _CFG_FLAGS if getattr(args, dest) is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _build_spec(args, cfg: SystemConfig) -> SweepSpec:
    if args.lambda_steps < 1:
        raise ValueError("lambda-steps must be >= 1")
    if args.lambda_steps == 1:
        grid = (args.lambda_min,)
    else:
        grid = tuple(np.linspace(args.lambda_min, args.lambda_max,
                                 args.lambda_steps))
    engines = tuple(e.strip() for e in args.engines.split(",") if e.strip())
    return SweepSpec(
        grid=grid,
        cfg=cfg,
        engines=engines,
        n_reps=args.reps,
        seed=args.seed,
        duration=int(round(args.duration_s * 1000)),
    )


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def main(argv=None) -> int:
    parser = _Parser(prog="rachcap",
                     description="access-capacity model and simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="load sweep to CSV")
    _add_common(p_sweep)
    _add_sweep_args(p_sweep)

    p_bp = sub.add_parser("breaking-point",
                          help="find the outage blow-up load")
    _add_common(p_bp)
    _add_sweep_args(p_bp)
    p_bp.add_argument("--threshold", type=float, default=0.1)

    p_val = sub.add_parser("validate",
                           help="oracle vs closed-form check table")
    p_val.add_argument("--seed", type=int, default=12345)
    p_val.add_argument("--out", metavar="PATH")

    args = parser.parse_args(argv)

    if args.command == "validate":
        checks = validate(seed=args.seed)
        text = format_validation(checks)
        try:
            _write(text, args.out)
        except OSError as exc:
            print(f"rachcap: cannot write output: {exc}", file=sys.stderr)
            return 3
        return 0 if all(c.passed for c in checks) else 2

    try:
        cfg = _build_cfg(args)
        spec = _build_spec(args, cfg)
    except FileNotFoundError as exc:
        print(f"rachcap: cannot read config: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"rachcap: invalid configuration: {exc}", file=sys.stderr)
        return 2

    if args.command == "sweep":
        rows = run_sweep(spec, progress=_progress)
        text = format_rows(rows, "plot" if args.plot_data else "csv")
        try:
            _write(text, args.out)
        except OSError as exc:
            print(f"rachcap: cannot write output: {exc}", file=sys.stderr)
            return 3
        return 0

    # breaking-point
    try:
        points = breaking_point(spec, args.threshold)
    except ValueError as exc:
        print(f"rachcap: invalid configuration: {exc}", file=sys.stderr)
        return 2
    lines = []
    for engine in ENGINE_ORDER:
        if engine not in points:
            continue
        bp = points[engine]
        if bp.lambda_star is None:
            lines.append(f"engine={engine} lambda_star=none "
                         f"threshold={args.threshold:g} note={bp.message!r}")
        else:
            lines.append(f"engine={engine} lambda_star={bp.lambda_star:.9g} "
                         f"threshold={args.threshold:g} refined={bp.refined}")
    if ("model" in points and "sim" in points
            and points["model"].lambda_star and points["sim"].lambda_star):
        ratio = points["model"].lambda_star / points["sim"].lambda_star
        lines.append(f"model_sim_ratio={ratio:.9g}")
    text = "\n".join(lines) + "\n"
    try:
        _write(text, args.out)
    except OSError as exc:
        print(f"rachcap: cannot write output: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
