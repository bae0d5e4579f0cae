"""Command-line front end.

Exit codes: 0 pass, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import click
import numpy as np

from . import lyapunov, pep
from .adaptive import run_fgm_bl, run_fgm_rc, run_obl_f, run_obl_g, run_orc_f
from .fsfo import Method, Trajectory, build_schedule, fmt, run_fsfo
from .oracles import PROBLEMS, SmoothOracle, get_problem, random_quadratic

DETERMINISTIC = ("gd", "fgm", "ogm", "ogm-g", "orc-f-flat", "obl-f-flat", "obl-g-flat")
RANDOMIZED = ("orc-f", "fgm-rc", "fgm-rc-sharp")
BACKTRACKING = ("fgm-bl", "obl-f", "obl-g")
ALL_METHODS = DETERMINISTIC + RANDOMIZED + BACKTRACKING

DESCRIPTIONS = {
    "gd": "gradient descent with step 1/L",
    "fgm": "Nesterov's fast gradient method",
    "ogm": "optimized gradient method with last-step modification",
    "ogm-g": "optimized gradient method for gradient norm",
    "orc-f-flat": "ORC-F-flat, phi-sequence method",
    "obl-f-flat": "OBL-F-flat with last-step x~_N",
    "obl-g-flat": "OBL-G-flat, gradient-norm method (N >= 3)",
    "orc-f": "randomized coordinate ORC-F",
    "fgm-rc": "randomized coordinate FGM with rational coefficients",
    "fgm-rc-sharp": "randomized coordinate FGM with theta coefficients",
    "fgm-bl": "FGM with backtracking line search",
    "obl-f": "OBL-F with backtracking line search",
    "obl-g": "OBL-G with backtracking line search (N >= 3)",
}

TOL_ENV = "ACCEL_CERT_TOL"
RANDOM_PROBLEM = "random"
RANDOM_DIM = 5
RANDOM_COND = 50.0


class ConfigError(click.UsageError):
    """Exit code 2."""


@dataclass
class RunConfig:
    method: str = "fgm"
    problem: str = "quad-diag-10"
    N: int = 10
    seed: int = 0
    L0: Optional[float] = None
    eta: float = 2.0
    output: Optional[str] = None
    format: str = "csv"
    x0: str = "default"
    tol: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_sources(cls, config_path: Optional[str], **flags) -> "RunConfig":
        """File values first, then flags that were given."""
        data = {}
        if config_path:
            try:
                with open(config_path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
            if "n" in data and "N" not in data:
                data["N"] = data.pop("n")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in flags.items() if v is not None})
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.method not in ALL_METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.problem != RANDOM_PROBLEM and self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if not isinstance(self.N, int) or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        if self.method in ("obl-g-flat", "obl-g") and self.N < 3:
            raise ConfigError(f"{self.method} needs N >= 3")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.eta <= 1:
            raise ConfigError("eta must exceed 1")
        if self.L0 is not None and self.L0 <= 0:
            raise ConfigError("L0 must be positive")


def global_tolerance(override: Optional[float] = None) -> float:
    if override is not None:
        return float(override)
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            v = float(env)
        except ValueError:
            raise ConfigError(f"{TOL_ENV} must be a number, got {env!r}") from None
        if not v > 0:
            raise ConfigError(f"{TOL_ENV} must be positive")
        return v
    return lyapunov.IDENTITY_RTOL


def parse_range(text: str) -> list[int]:
    """'7' or '1..25'."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise ConfigError(f"bad horizon range {text!r}; use N or A..B") from None
    if lo < 1 or hi < lo:
        raise ConfigError(f"bad horizon range {text!r}")
    return list(range(lo, hi + 1))


def make_problem(problem: str, seed: int) -> tuple[SmoothOracle, np.ndarray]:
    if problem == RANDOM_PROBLEM:
        rng = np.random.default_rng(seed)
        oracle = random_quadratic(rng, RANDOM_DIM, RANDOM_COND, name=f"random-{seed}")
        return oracle, rng.normal(size=RANDOM_DIM) * 2.0
    return get_problem(problem)


def resolve_x0(value: str, oracle: SmoothOracle, default: np.ndarray) -> np.ndarray:
    if value in (None, "default"):
        return default
    if value == "at-minimizer":
        if oracle.x_star is None:
            raise ConfigError("problem has no known minimizer")
        return np.array(oracle.x_star, dtype=float)
    try:
        x0 = np.array([float(v) for v in value.split(",")])
    except ValueError:
        raise ConfigError(f"bad x0 {value!r}") from None
    if x0.shape[0] != oracle.dim:
        raise ConfigError(f"x0 has {x0.shape[0]} entries, problem has dimension {oracle.dim}")
    return x0


def run_method(method: str, oracle: SmoothOracle, x0, N: int, seed: int = 0,
               L0: Optional[float] = None, eta: float = 2.0, last_step: bool = True) -> Trajectory:
    """Run any method by id. Backtracking methods default to L0 = L/10."""
    if method in DETERMINISTIC:
        return run_fsfo(build_schedule(Method(method), N, last_step=last_step), oracle, x0)
    if method == "orc-f":
        return run_orc_f(oracle, x0, N, seed)
    if method in ("fgm-rc", "fgm-rc-sharp"):
        return run_fgm_rc(oracle, x0, N, seed, sharp=method == "fgm-rc-sharp")
    L0 = oracle.L / 10.0 if L0 is None else L0
    if method == "fgm-bl":
        return run_fgm_bl(oracle, x0, N, L0, eta)
    if method == "obl-f":
        return run_obl_f(oracle, x0, N, L0, eta)
    if method == "obl-g":
        return run_obl_g(oracle, x0, N, L0, eta)
    raise ValueError(f"unknown method {method!r}")


def row_bounds(traj: Trajectory, rate: Optional[lyapunov.RateReport]) -> dict:
    """Per-row (observed, bound, slack) columns; a check at index k lands on row min(k, N)."""
    n = traj.N + 1
    cols = {"observed": [None] * n, "bound": [None] * n, "slack": [None] * n}
    if rate is None:
        return cols
    for ch in sorted(rate.checks, key=lambda c: not c.binding):
        r = min(ch.k, traj.N)
        if cols["bound"][r] is None:
            cols["observed"][r] = ch.observed
            cols["bound"][r] = ch.bound
            cols["slack"][r] = ch.slack
    return cols


def _rate_or_none(method, traj, oracle, tol):
    if method == "gd":
        return None
    if method in ("obl-g-flat", "obl-g", "ogm-g") or oracle.x_star is not None:
        return lyapunov.verify_rate(method, traj, oracle=oracle, tol=tol)
    return None


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def cmd_run(cfg: RunConfig) -> int:
    tol = global_tolerance(cfg.tol)
    oracle, x0 = make_problem(cfg.problem, cfg.seed)
    x0 = resolve_x0(cfg.x0, oracle, x0)
    if cfg.method in RANDOMIZED and oracle.coordinate_L is None:
        raise ConfigError(f"problem {cfg.problem} has no coordinate smoothness constants")
    try:
        traj = run_method(cfg.method, oracle, x0, cfg.N, cfg.seed, cfg.L0, cfg.eta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rate = _rate_or_none(cfg.method, traj, oracle, tol)
    cols = row_bounds(traj, rate)
    if cfg.format == "csv":
        text = traj.to_csv(oracle.f_star, cols)
    else:
        text = json.dumps({"config": asdict(cfg), "tolerance": tol,
                           "trajectory": json.loads(traj.to_json(oracle.f_star)),
                           "rate": None if rate is None else rate.to_dict()}, indent=2) + "\n"
    _emit(text, cfg.output)
    return 0 if rate is None or rate.ok else 1


def _certify_one(args) -> dict:
    method, N, L, kkt = args
    return pep.certify(method, N, L, kkt=kkt).to_dict()


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def cmd_certify(method: str, ns: list[int], L: float = 1.0, kkt: bool = True, jobs: int = 1) -> tuple[int, list]:
    try:
        cm = pep.CertMethod(method)
    except ValueError:
        raise ConfigError(f"no certificate for {method!r}; known: {[m.value for m in pep.CertMethod]}") from None
    if cm is pep.CertMethod.OBL_G_FLAT and ns[0] < 3:
        raise ConfigError("obl-g-flat certificates need N >= 3")
    reports = _map(_certify_one, [(cm.value, N, L, kkt) for N in ns], jobs)
    return (0 if all(r["ok"] for r in reports) else 1), reports


def _verify_one(args) -> dict:
    method, problem, N, seed, tol = args
    oracle, x0 = make_problem(problem, seed)
    # the Lyapunov chain of OBL-F-flat runs on the unmodified sequence
    last_step = method != "obl-f-flat"
    traj = run_method(method, oracle, x0, N, seed=seed, last_step=last_step)
    out = {"seed": seed, "problem": oracle.name, "N": N}
    ok = True
    if method in lyapunov.METHODS:
        rep = lyapunov.verify_decrement(method, traj, oracle=oracle, tol=tol)
        out.update(identity_ok=rep.ok, max_identity_residual=rep.max_identity_residual,
                   min_decrement=rep.min_decrement, min_expected_decrement=rep.min_expected_decrement,
                   failures=rep.failures[:10])
        ok &= rep.ok
    rate = lyapunov.verify_rate(method, traj, oracle=oracle, tol=tol)
    out.update(rate_ok=rate.ok, min_rate_slack=rate.min_slack)
    ok &= rate.ok
    out["ok"] = bool(ok)
    return out


def cmd_verify_lyapunov(method: str, problem: str, N: int, seeds: int, tol: float,
                        jobs: int = 1) -> tuple[int, dict]:
    if method not in lyapunov.RATE_METHODS:
        raise ConfigError(f"no Lyapunov analysis or rate for {method!r}")
    if N < 1:
        raise ConfigError("N must be positive")
    if method in ("obl-g-flat", "obl-g") and N < 3:
        raise ConfigError(f"{method} needs N >= 3")
    if seeds < 1:
        raise ConfigError("seeds must be positive")
    if problem != RANDOM_PROBLEM and problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {problem!r}")
    runs = _map(_verify_one, [(method, problem, N, s, tol) for s in range(seeds)], jobs)
    summary = {"method": method, "problem": problem, "N": N, "seeds": seeds, "tolerance": tol,
               "ok": all(r["ok"] for r in runs), "runs": runs}
    if method in lyapunov.METHODS:
        summary["max_identity_residual"] = max(r["max_identity_residual"] for r in runs)
    exp = [r.get("min_expected_decrement") for r in runs if r.get("min_expected_decrement") is not None]
    if exp:
        summary["min_expected_decrement"] = min(exp)
    return (0 if summary["ok"] else 1), summary


def _sweep_one(args) -> dict:
    method, problem, N, seed, L0, eta, tol = args
    oracle, x0 = make_problem(problem, seed)
    traj = run_method(method, oracle, x0, N, seed, L0, eta)
    rate = _rate_or_none(method, traj, oracle, tol)
    last = None
    if rate is not None:
        binding = [c for c in rate.checks if c.binding] or rate.checks
        last = max(binding, key=lambda c: c.k)
    return {"N": N, "f_gap": float(traj.fx[N] - oracle.f_star),
            "grad_norm_sq": float(traj.gx[N] @ traj.gx[N]),
            "observed": None if last is None else last.observed,
            "bound": None if last is None else last.bound,
            "slack": None if last is None else last.slack,
            "ok": True if rate is None else rate.ok}


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Accelerated first-order methods: runs, Lyapunov checks, dual certificates."""


@main.command("run")
@click.option("--config", "config_path", type=click.Path(), help="JSON config; flags override it.")
@click.option("--method")
@click.option("--problem")
@click.option("--n", "N", type=int)
@click.option("--seed", type=int)
@click.option("--L0", "L0", type=float, help="Initial smoothness estimate (default L/10).")
@click.option("--eta", type=float)
@click.option("--x0", help="'default', 'at-minimizer' or comma-separated values.")
@click.option("--output", "-o", type=click.Path())
@click.option("--format", "fmt_", type=click.Choice(["csv", "json"]))
@click.option("--tol", type=float)
def run_cmd(config_path, method, problem, N, seed, L0, eta, x0, output, fmt_, tol):
    """Run one method and write its trajectory with bound columns."""
    cfg = RunConfig.from_sources(config_path, method=method, problem=problem, N=N, seed=seed,
                                 L0=L0, eta=eta, x0=x0, output=output, format=fmt_, tol=tol)
    sys.exit(cmd_run(cfg))


@main.command("certify")
@click.option("--method", required=True)
@click.option("--n", "nrange", default="1..25", show_default=True, help="N or A..B.")
@click.option("--L", "L", type=float, default=1.0, show_default=True)
@click.option("--no-kkt", is_flag=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--output", "-o", type=click.Path())
def certify_cmd(method, nrange, L, no_kkt, jobs, output):
    """Build and check closed-form dual certificates over a range of horizons."""
    code, reports = cmd_certify(method, parse_range(nrange), L, not no_kkt, jobs)
    _emit(json.dumps({"method": method, "ok": code == 0, "reports": reports}, indent=2) + "\n", output)
    if output:
        for r in reports:
            click.echo(f"N={r['N']:3d}  {'pass' if r['ok'] else 'FAIL'}  tau={fmt(r['tau'])}"
                       f"  zero={r['zero_block']:.1e}  min_eig={r['min_eig']:.1e}  h={r['h_match']:.1e}",
                       err=True)
    sys.exit(code)


@main.command("verify-lyapunov")
@click.option("--method", required=True)
@click.option("--problem", default=RANDOM_PROBLEM, show_default=True)
@click.option("--n", "N", type=int, default=20, show_default=True)
@click.option("--seeds", type=int, default=10, show_default=True)
@click.option("--tol", type=float)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--output", "-o", type=click.Path())
def verify_cmd(method, problem, N, seeds, tol, jobs, output):
    """Check decrement identities and rates across seeds."""
    code, summary = cmd_verify_lyapunov(method, problem, N, seeds, global_tolerance(tol), jobs)
    _emit(json.dumps(summary, indent=2) + "\n", output)
    click.echo(f"{method}: {'pass' if code == 0 else 'FAIL'} over {seeds} seeds", err=True)
    sys.exit(code)


@main.command("sweep")
@click.option("--method", required=True)
@click.option("--problem", default="quad-diag-10", show_default=True)
@click.option("--n", "nrange", default="1..50", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--L0", "L0", type=float)
@click.option("--eta", type=float, default=2.0, show_default=True)
@click.option("--tol", type=float)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--output", "-o", type=click.Path())
def sweep_cmd(method, problem, nrange, seed, L0, eta, tol, jobs, output):
    """Final-iterate gap and bound for each horizon in a range."""
    if method not in ALL_METHODS:
        raise ConfigError(f"unknown method {method!r}")
    if problem != RANDOM_PROBLEM and problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {problem!r}")
    ns = parse_range(nrange)
    if method in ("obl-g-flat", "obl-g") and ns[0] < 3:
        raise ConfigError(f"{method} needs N >= 3")
    tol = global_tolerance(tol)
    rows = _map(_sweep_one, [(method, problem, N, seed, L0, eta, tol) for N in ns], jobs)
    cols = ["N", "f_gap", "grad_norm_sq", "observed", "bound", "slack", "ok"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r[c] is None else (str(int(r[c])) if c in ("N", "ok") else fmt(r[c]))
                              for c in cols))
    _emit("\n".join(lines) + "\n", output)
    sys.exit(0 if all(r["ok"] for r in rows) else 1)


@main.command("list-methods")
def list_methods_cmd():
    """Method ids."""
    for m in ALL_METHODS:
        click.echo(f"{m:14s} {DESCRIPTIONS[m]}")


@main.command("list-problems")
def list_problems_cmd():
    """Problem ids."""
    for pid, (_, x0, desc) in PROBLEMS.items():
        click.echo(f"{pid:14s} {desc}  x0={x0.tolist()}")
    click.echo(f"{RANDOM_PROBLEM:14s} random quadratic, dim {RANDOM_DIM}, condition {RANDOM_COND:g}, seeded")


if __name__ == "__main__":
    main()
