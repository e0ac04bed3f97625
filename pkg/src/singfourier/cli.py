"""Command-line front end: run one experiment described by a JSON config.

    singfourier run config.json [--out DIR] [--threads N]
    singfourier --list-kinds

Exit status: 0 success, 2 configuration error, 3 numerical failure,
4 a bound came out violated beyond tolerance.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import (BoundViolation, ConfigError, CostBudgetExceeded, FitError,
                         QuadratureError)
from .io import canonical_json, sha256_text, table_csv, write_json, write_text

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 2, 3, 4

KINDS = {
    "mbeta": "table of M_beta and its maximiser over a grid of exponents",
    "kernel": "K_{beta,f} on a grid, with mass and optional Holder estimate",
    "cesaro": "Cesaro curve of a singular measure, with regime classification",
    "identity_checks": "Gamma-moment and Plancherel smoothing identities, two ways each",
    "spectral_density": "delta_1 spectral density of a lattice operator and its bounds",
    "return_probability": "averaged return probability of a singular lattice state",
    "bound_sweep": "decay bounds evaluated at a list of times",
    "fit": "decay fit of a previously written curve CSV",
}


class _Outcome:
    """Files produced by a run plus the status they imply."""

    def __init__(self):
        self.files: dict[str, str] = {}
        self.grids: dict = {}
        self.status = EXIT_OK
        self.messages: list[str] = []

    def text(self, name, text):
        self.files[name] = text

    def json(self, name, obj):
        self.files[name] = canonical_json(obj)

    def flag(self, status, message):
        self.status = max(self.status, status)
        self.messages.append(message)


def load_schema() -> dict:
    return json.loads(resources.files("singfourier").joinpath("config_schema.json").read_text())


def validate_config(cfg) -> None:
    """Schema check followed by the semantic checks a schema cannot express."""
    import jsonschema
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    for key, val in cfg["params"].items():
        if isinstance(val, dict) and "geometric" in val:
            g = val["geometric"]
            if g["max"] <= g["min"]:
                raise ConfigError(f"params/{key}: geometric max must exceed min")
        if isinstance(val, dict) and "linear" in val and val["linear"]["stop"] <= val["linear"]["start"]:
            raise ConfigError(f"params/{key}: linear stop must exceed start")


def make_grid(spec) -> np.ndarray:
    from .oscillatory import geometric_grid
    if "values" in spec:
        return np.asarray(spec["values"], dtype=float)
    if "geometric" in spec:
        g = spec["geometric"]
        return geometric_grid(g["min"], g["max"], g.get("per_decade", 16))
    lin = spec["linear"]
    return np.linspace(lin["start"], lin["stop"], lin["num"])


def _density(spec):
    from .kernels import DensityFunction
    if spec is None:
        return DensityFunction.indicator_unit()
    return DensityFunction.from_dict(spec)


def _weight(spec):
    from .kernels import BoundedWeight
    return BoundedWeight.constant_one() if spec is None else BoundedWeight.from_dict(spec)


def _operator(spec):
    from .lattice import LatticeOperator
    return LatticeOperator.from_dict(spec or {})


def _run_mbeta(p, out, threads):
    from .oscillatory import compute_m_beta
    kw = {k: p[k] for k in ("step", "scan_limit") if k in p}
    rows = []
    for b in p["betas"]:
        if b == 0:
            raise ConfigError("M_beta needs beta > 0")
        c = compute_m_beta(b, **kw)
        rows.append((float(b), c.m_beta, c.eta_star))
    out.text("m_beta.csv", table_csv(["beta", "M_beta", "eta_star"], rows))
    out.grids["betas"] = list(p["betas"])


def _run_kernel(p, out, threads):
    from .kernels import SingularMeasure, estimate_holder_exponent, kernel_eval, measure_mass
    f = _density(p["f"])
    x = make_grid(p["x"])
    out.text("kernel.csv", table_csv(["x", "K"], zip(x, kernel_eval(p["beta"], f, x))))
    mu = SingularMeasure(p["beta"], f)
    summary = {"beta": p["beta"], "f": f.to_dict(), "mass": measure_mass(mu),
               "young_bound": mu.young_bound}
    if p.get("holder", False):
        summary["holder_exponent"] = estimate_holder_exponent(mu)
    out.json("measure.json", summary)
    out.grids["x"] = x


def _classify_into(out, curve):
    from .fitting import classify_regime
    try:
        out.json("fit.json", classify_regime(curve).to_dict())
    except FitError as exc:
        out.messages.append(f"no regime classification: {exc}")


def _run_cesaro(p, out, threads):
    from .kernels import SingularMeasure
    from .oscillatory import cesaro_curve
    mu = SingularMeasure(p["beta"], _density(p["f"]), _weight(p.get("g")))
    t = make_grid(p["t_grid"])
    out.grids["t_grid"] = t
    try:
        curve = cesaro_curve(mu, t, p.get("convention", "fourier_2pi"), p.get("max_evaluations"))
    except CostBudgetExceeded as exc:
        out.text("cesaro.csv", exc.partial.to_csv())
        out.flag(EXIT_NUMERICAL, f"{exc} (residual bound {exc.residual:.3g})")
        return
    out.text("cesaro.csv", curve.to_csv())
    if p.get("classify", True):
        _classify_into(out, curve)


def _run_identity_checks(p, out, threads):
    from .bounds import gaussian_moment_identity, plancherel_identity_check
    f = _density(p.get("f"))
    g_tol = p.get("gamma_rtol", 1e-8)
    p_tol = p.get("plancherel_rtol", 1e-5)
    records = []
    for b in p["betas"]:
        for t in p["times"]:
            if b > 0.5:
                chk = gaussian_moment_identity(b, t)
                records.append({"check": "gaussian_moment", "beta": b, "t": t, "lhs": chk.lhs,
                                "rhs": chk.rhs, "relative_gap": chk.relative_gap,
                                "passed": chk.relative_gap <= g_tol})
            chk = plancherel_identity_check(b, f, t)
            records.append({"check": "plancherel_smoothing", "beta": b, "t": t, "lhs": chk.lhs,
                            "rhs": chk.rhs, "relative_gap": chk.relative_gap,
                            "passed": chk.relative_gap <= p_tol})
    out.json("identities.json", {"f": f.to_dict(), "gamma_rtol": g_tol,
                                 "plancherel_rtol": p_tol, "checks": records})
    failed = [r for r in records if not r["passed"]]
    if failed:
        out.flag(EXIT_NUMERICAL, f"{len(failed)} identity checks exceeded tolerance")


def _run_spectral_density(p, out, threads):
    from .lattice import density_bounds_check, spectral_density_values
    op = _operator(p["operator"])
    E = make_grid(p["energies"])
    out.text("density.csv", table_csv(["E", "density"], zip(E, spectral_density_values(op, E))))
    out.grids["energies"] = E
    grid = np.linspace(0.0, 1.0, p.get("bounds_grid_points", 1001))
    try:
        db = density_bounds_check(op, grid)
    except BoundViolation as exc:
        db = exc.report
        out.flag(EXIT_VIOLATION, str(exc))
    out.json("density_bounds.json", {"operator": op.to_dict(), "c1": db.c1, "c2": db.c2,
                                     "F_N": db.F_N, "C_N": db.C_N, "witness": db.witness,
                                     "holds": db.holds})


def _run_return_probability(p, out, threads):
    from .dynamics import build_singular_state, return_curve, trusted_window
    from .fitting import detect_log_over_t, fit_power_law
    op = _operator(p["operator"])
    conv = p.get("convention", "angular")
    state = build_singular_state(op, p["beta"], _density(p["f"]), p.get("sampling", "cell"))
    t = make_grid(p["t_grid"]) if "t_grid" in p else trusted_window(state, convention=conv)
    out.grids["t_grid"] = t
    curve = return_curve(state, t, conv, workers=threads)
    out.text("return_curve.csv", curve.to_csv())
    out.json("state.json", {"operator": op.to_dict(), "beta": state.beta,
                            "f": state.f.to_dict(), "sampling": state.sampling,
                            "norm_sq": state.norm_sq, "heisenberg_time": curve.heisenberg_time,
                            "dropped_mass": curve.dropped_mass})
    fits = {}
    for name, fitter in (("power", fit_power_law), ("log_over_t", detect_log_over_t)):
        try:
            fits[name] = fitter(curve).to_dict()
        except FitError as exc:
            fits[name] = {"error": str(exc)}
    out.json("fit.json", fits)


def _run_bound_sweep(p, out, threads):
    times = [float(t) for t in p["times"]]
    out.grids["times"] = times
    reports = []
    if p["target"] == "cesaro":
        from .bounds import naive_report, sharp_report
        from .kernels import SingularMeasure
        mu = SingularMeasure(p["beta"], _density(p["f"]), _weight(p.get("g")))
        for t in times:
            reports.append(sharp_report(mu, t))
            if p.get("include_naive", False):
                reports.append(naive_report(mu, t))
    else:
        from .dynamics import build_singular_state, maintheorem_bound_check
        from .lattice import density_bounds_check
        op = _operator(p.get("operator"))
        state = build_singular_state(op, p["beta"], _density(p["f"]))
        c2 = density_bounds_check(op, np.linspace(0.0, 1.0, 1001)).c2
        reports = [maintheorem_bound_check(state, op, t, c2=c2) for t in times]
    out.json("bounds.json", [dict(r.to_dict(), holds=r.holds) for r in reports])
    bad = [r for r in reports if not r.holds]
    if bad:
        out.flag(EXIT_VIOLATION, f"{len(bad)} bound evaluations violated")


def _run_fit(p, out, threads, base: Path):
    from .dynamics import ReturnCurve
    from .fitting import classify_regime, detect_log_over_t, fit_power_law
    from .oscillatory import CesaroCurve
    path = Path(p["curve"])
    if not path.is_absolute():
        path = base / path
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read curve {path}: {exc}") from None
    header = text.split("\n", 1)[0].split(",")
    curve = ReturnCurve.from_csv(text) if "P" in header else CesaroCurve.from_csv(text)
    fitter = {"power": fit_power_law, "log_over_t": detect_log_over_t,
              "classify": classify_regime}[p["method"]]
    window = tuple(p["window"]) if "window" in p else None
    out.json("fit.json", fitter(curve, window).to_dict())
    out.grids["curve_sha256"] = sha256_text(text)


def _versions() -> dict:
    import scipy
    return {"singfourier": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(config_path, out_dir=None, threads=1) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    config_path = Path(config_path)
    try:
        cfg = json.loads(config_path.read_text())
        validate_config(cfg)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    target = Path(out_dir or cfg.get("output_dir") or Path("out") / cfg["name"])
    out = _Outcome()
    runner = {"mbeta": _run_mbeta, "kernel": _run_kernel, "cesaro": _run_cesaro,
              "identity_checks": _run_identity_checks,
              "spectral_density": _run_spectral_density,
              "return_probability": _run_return_probability,
              "bound_sweep": _run_bound_sweep}.get(cfg["kind"])
    try:
        if runner is None:
            _run_fit(cfg["params"], out, threads, config_path.parent)
        else:
            runner(cfg["params"], out, threads)
    except (QuadratureError, CostBudgetExceeded, FitError, ArithmeticError,
            FloatingPointError) as exc:
        out.flag(EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}")
    except BoundViolation as exc:
        out.flag(EXIT_VIOLATION, str(exc))
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        hashes = {name: write_text(target / name, text) for name, text in sorted(out.files.items())}
        manifest = {"name": cfg["name"], "kind": cfg["kind"], "config": cfg,
                    "config_sha256": sha256_text(canonical_json(cfg)),
                    "versions": _versions(), "grids": out.grids, "outputs": hashes,
                    "exit_status": out.status, "messages": out.messages}
        write_json(target / "manifest.json", manifest)
    except OSError as exc:
        print(f"config error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for msg in out.messages:
        print(msg, file=sys.stderr)
    return out.status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singfourier", description=__doc__.split("\n")[0])
    parser.add_argument("--list-kinds", action="store_true", help="list experiment kinds and exit")
    sub = parser.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run the experiment described by a JSON config")
    r.add_argument("config", help="path to the experiment config")
    r.add_argument("--out", help="output directory (overrides output_dir in the config)")
    r.add_argument("--threads", type=int, default=1,
                   help="worker threads; affects wall time only, never values")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_kinds:
        width = max(map(len, KINDS))
        for kind, desc in KINDS.items():
            print(f"{kind.ljust(width)}  {desc}")
        return EXIT_OK
    if args.command != "run":
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.config, args.out, args.threads)
