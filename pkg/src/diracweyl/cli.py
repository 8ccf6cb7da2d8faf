"""Command-line driver.

    diracweyl spectrum --problem free.json --window -5 5 --out out/
    diracweyl weyl --problem free_halfline.json --z 0+1i
    diracweyl verify --problem radial.json --suite gauge

Each command writes ``<out>/report.json`` (and CSV tables) atomically.  Exit
codes: 0 success, 1 computational failure or failed check (the report carries
the diagnostic), 2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import BoundaryCondition, ConfigurationError, RadialFrame, classify_endpoint, left_frame
from .coefficients import HypothesisError
from .debranges import e_function, kernel_integral, nesting_check, rep_identity_residual
from .expression import EvaluationDomainError, ParseError
from .gauge import (LiouvilleTransform, invariance_harness, kill_potential, normalize_det, normalize_trace,
                    normalize_weight, push_boundary, pushed_frame, pushforward, transform_from_json)
from .ode import DEFAULT_SETTINGS, PropagationSettings
from .problems import Problem, load_problem
from .weyl import (Realization, WeylFunction, eigenvalues, herglotz_check, interlacing_violations,
                   spectral_measure, two_spectra_report)

COMMANDS = ("spectrum", "weyl", "measure", "kernel-check", "gauge", "radial", "two-spectra", "verify")
SUITES = ("gauge", "kernel", "weyl", "radial", "all")


# ---------------------------------------------------------------------------
# argument parsing


def parse_z(text: str) -> complex:
    """``RE+IMi`` (also ``2i``, ``-1.5``, ``1-0.5i``, ``i``)."""
    s = text.strip().replace(" ", "").replace("I", "i").replace("j", "i")
    if s.endswith("i"):
        body = s[:-1]
        if body in ("", "+", "-") or body[-1] in "+-":
            s = body + "1i"
    try:
        return complex(s.replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot read complex number {text!r} (use RE+IMi)") from None


def parse_schedule(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}") from None
    if not vals or any(not (v > 0) for v in vals):
        raise argparse.ArgumentTypeError("schedule entries must be positive")
    return vals


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` (inclusive linspace) or a comma list."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            grid = np.linspace(float(lo), float(hi), int(n))
        else:
            grid = np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if len(grid) == 0 or np.any(np.diff(grid) <= 0):
        raise argparse.ArgumentTypeError("grid must be non-empty and strictly increasing")
    return grid


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diracweyl", description="Spectral computations for weighted Dirac operators.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--problem", required=True, metavar="PATH")
        s.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"))
        s.add_argument("--z", action="append", type=parse_z, metavar="RE+IMi")
        s.add_argument("--eps", type=parse_schedule, metavar="SCHEDULE")
        s.add_argument("--c-grid", type=parse_grid, metavar="SPEC")
        s.add_argument("--out", default="out", metavar="DIR")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--tol", type=_positive, default=1e-6)
        if name == "verify":
            s.add_argument("--suite", choices=SUITES, default="all")
    return p


# ---------------------------------------------------------------------------
# serialisation


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, complex to [re, im], non-finite to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items() if k != "seconds"}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [_clean(float(v.real)), _clean(float(v.imag))]
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return v


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join("%.17g" % float(v) for v in r))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


class Run:
    def __init__(self, args, problem: Problem):
        self.args = args
        self.problem = problem
        self.settings = DEFAULT_SETTINGS
        self.tables: dict[str, str] = {}
        self.provenance: dict = {}

    @property
    def window(self):
        if self.args.window is None:
            raise ConfigurationError(f"{self.args.command} needs --window LO HI")
        lo, hi = self.args.window
        if not lo < hi:
            raise ConfigurationError("window must satisfy LO < HI")
        return (lo, hi)

    def zs(self, default):
        return np.array(self.args.z if self.args.z else default, dtype=complex)

    def frame(self, left=None):
        return left_frame(self.problem.expr, left or self.problem.left, self.settings)

    def weyl(self, left=None):
        return WeylFunction(self.frame(left), self.problem.require_right(), settings=self.settings)

    def c_grid(self, n=50):
        if self.args.c_grid is not None:
            return self.args.c_grid
        iv = self.problem.expr.interval
        hi = iv.b if iv.finite_right else iv.interior_point() + 1.0
        lo = iv.a if iv.finite_left else hi - 2.0
        if n < 20:
            return lo + (hi - lo) * np.linspace(1.0 / n, 1.0, n) * 0.999  # E needs interior points
        # geometric lead-in toward a (vanishing of K), then uniform up to just inside b
        lead = np.geomspace(1e-7, 1.0 / (n - 10), 10, endpoint=False)
        return lo + (hi - lo) * np.concatenate([lead, np.linspace(1.0 / (n - 10), 1.0, n - 10)]) * 0.999


def cmd_spectrum(run: Run):
    W = run.weyl()
    if not W.discrete:
        raise ConfigurationError("spectrum needs discrete right data (regular, truncated or reference)")
    S = eigenvalues(W, run.window)
    run.tables["spectrum.csv"] = S.to_csv()
    res = {"eigenvalues": S.eigenvalues, "count": len(S.eigenvalues), "flagged": S.flagged,
           "max_residual": float(np.max(S.residuals)) if len(S.residuals) else 0.0}
    if run.problem.left_alt is not None:
        Wa = run.weyl(run.problem.left_alt)
        Sa = eigenvalues(Wa, run.window)
        run.tables["spectrum_alt.csv"] = Sa.to_csv()
        res["eigenvalues_alt"] = Sa.eigenvalues
        res["interlacing_violations"] = interlacing_violations(S.eigenvalues, Sa.eigenvalues)
    return res, True


def cmd_weyl(run: Run):
    W = run.weyl()
    zs = run.zs([1j])
    M = W(zs)
    run.tables["weyl.csv"] = _csv(["re_z", "im_z", "re_M", "im_M"],
                                  [[z.real, z.imag, m.real, m.imag] for z, m in zip(zs, M)])
    herg = herglotz_check(W, zs[zs.imag != 0]) if np.any(zs.imag != 0) else None
    res = {"z": list(zs), "M": list(M), "herglotz": herg, "frame": W.frame.to_json()}
    return res, herg is None or herg["ok"]


def cmd_measure(run: Run):
    W = run.weyl()
    eps = run.args.eps or (1e-2, 1e-3, 1e-4)
    mu = spectral_measure(W, run.window, eps_schedule=eps)
    run.tables["atoms.csv"] = mu.atoms_csv()
    run.tables["density.csv"] = mu.density_csv()
    res = mu.to_json()
    res["total_mass"] = mu.total_mass()
    return res, True


def _kernel_suite(run: Run):
    frame = run.frame()
    tol = run.args.tol
    rng = np.random.default_rng(run.args.seed)
    grid = run.c_grid()
    nest = nesting_check(frame, 1j, grid)
    probes = []
    worst = 0.0
    convention = None
    # structure identity away from the near-a lead-in, where both sides are tiny
    upper = grid[len(grid) // 5:] if len(grid) >= 5 else grid
    for c in upper[np.linspace(0, len(upper) - 1, min(3, len(upper))).astype(int)]:
        E = e_function(frame, float(c))
        convention = E.convention
        zs = run.zs([])
        pts = list(zs) + list(rng.uniform(-4, 4, 3) + 1j * rng.uniform(-2, 2, 3))
        for z in pts:
            zeta = complex(rng.uniform(-4, 4), rng.uniform(0.1, 2))
            K = kernel_integral(frame, zeta, z, float(c))
            r = rep_identity_residual(E, K, relative=True)
            worst = max(worst, r)
            probes.append({"c": float(c), "zeta": zeta, "z": complex(z), "K": K.value, "relative_residual": r})
    run.tables["kernel.csv"] = _csv(["c", "K_ii"], list(zip(nest["c_grid"], nest["K"])))
    res = {"structure_identity": {"max_relative_residual": worst, "probes": probes, "convention": convention},
           "nesting": nest}
    return res, bool(worst < tol and nest["ok"])


def cmd_kernel_check(run: Run):
    return _kernel_suite(run)


def default_transforms(problem: Problem):
    """Transforms exercised by the gauge suite for this problem."""
    expr = problem.expr
    iv = expr.interval
    out = [("rotation", LiouvilleTransform.rotation(iv, "0.3+0.4*sin(2*x)", eta0=0.5)),
           ("affine", LiouvilleTransform.constant(iv, [[1.0, 0.5], [0.0, 1.0]], 2.0, 0.25))]
    finite = iv.finite_left and iv.finite_right
    if finite:
        out.append(("expression", LiouvilleTransform.from_expressions(iv, "x+x^2/4", [["1", "0"], ["x", "1"]])))
    if expr.radial is None and finite:
        for name, fn in (("normalize_weight", normalize_weight), ("normalize_trace", normalize_trace),
                         ("kill_potential", kill_potential), ("normalize_det", normalize_det)):
            out.append((name, fn(expr, validate=False)[1]))
    return out


def _problem_transforms(run: Run):
    if run.problem.transform is not None:
        return [("problem", transform_from_json(run.problem.expr, run.problem.transform))]
    return default_transforms(run.problem)


def _gauge_suite(run: Run):
    prob = run.problem
    right = prob.require_right()
    window = run.args.window if run.args.window is not None else (-10.0, 10.0)
    zs = run.zs(list(np.random.default_rng(run.args.seed).uniform(-5, 5, 10)
                     + 1j * np.random.default_rng(run.args.seed + 1).uniform(0.2, 3, 10)))
    grid = run.c_grid(4)
    reports = {}
    worst = 0.0
    rows = []
    for name, T in _problem_transforms(run):
        rep = invariance_harness(prob.expr, T, right, prob.left, window=tuple(window), zs=zs, c_grid=grid,
                                 settings=run.settings)
        reports[name] = rep.to_json()
        worst = max(worst, rep.max_deviation)
        rows.append([len(rows), rep.eigenvalue_distance, rep.weyl_deviation, rep.kernel_deviation])
    run.tables["gauge.csv"] = _csv(["transform_index", "eigenvalue_distance", "weyl_deviation", "kernel_deviation"],
                                   rows)
    return {"transforms": reports, "order": list(reports), "max_deviation": worst}, bool(worst < run.args.tol)


def cmd_gauge(run: Run):
    return _gauge_suite(run)


def _radial_suite(run: Run):
    prob = run.problem
    if not prob.is_radial:
        raise ConfigurationError("radial command needs a radial problem")
    expr = prob.expr
    kappa = expr.radial.kappa
    frame = RadialFrame(expr, run.settings)
    zs = run.zs([0, 1, -2, 2j, 1 + 1j, -1.5 - 1j])
    xs = np.array([1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    F, _ = frame.values(zs, xs)
    phi = F[..., 1]  # (nx, nz, 2)
    dev2 = np.abs(xs[:, None] ** (-kappa) * phi[..., 1] - 1)
    lim1 = np.abs(xs[:, None] ** kappa * phi[..., 0])
    rows = [[z.real, z.imag, x, dev2[i, j], lim1[i, j]] for i, x in enumerate(xs) for j, z in enumerate(zs)]
    run.tables["asymptotics.csv"] = _csv(["re_z", "im_z", "x", "dev_phi2", "xk_phi1"], rows)
    i4 = int(np.argmin(np.abs(xs - 1e-4)))
    small = np.abs(zs) <= 2
    d4 = float(dev2[i4, small].max()) if np.any(small) else 0.0
    l4 = float(lim1[i4, small].max()) if np.any(small) else 0.0
    cls = classify_endpoint(expr, "left")
    res = {"kappa": kappa, "expected_left": "limit_point" if kappa >= 0.5 else "limit_circle",
           "classification": {"verdict": cls.verdict, "diagnostic": cls.diagnostic},
           "deviation_phi2_at_1e-4": d4, "xk_phi1_at_1e-4": l4, "frame": frame.to_json()}
    return res, bool(d4 < run.args.tol and l4 < run.args.tol)


def cmd_radial(run: Run):
    return _radial_suite(run)


def cmd_two_spectra(run: Run):
    """S and T share the right condition and differ at the left endpoint."""
    prob = run.problem
    if prob.right is None or prob.left_alt is None:
        raise ConfigurationError("two-spectra needs 'right' and 'left_alt' conditions")
    name, T = _problem_transforms(run)[0]
    st = run.settings
    tilde = pushforward(prob.expr, T)
    right_t = push_boundary(prob.right, T)
    real = []
    for left in (prob.left, prob.left_alt):
        frame = run.frame(left)
        real.append(Realization(prob.expr, left, prob.right, st, frame=frame))
        real.append(Realization(tilde, None, right_t, st, frame=pushed_frame(frame, T, tilde)))
    window = run.args.window if run.args.window is not None else (-10.0, 10.0)
    rep = two_spectra_report(real[0], real[2], real[1], real[3], tuple(window), tol=run.args.tol)
    rep["transform"] = {"name": name, **T.to_json()}
    return rep, bool(rep["ok"])


def cmd_verify(run: Run):
    suite = run.args.suite
    prob = run.problem
    parts = {"gauge": _gauge_suite, "kernel": _kernel_suite, "weyl": cmd_weyl, "radial": _radial_suite}
    if suite == "all":
        names = ["weyl", "kernel", "gauge"] + (["radial"] if prob.is_radial else [])
    else:
        names = [suite]
    res, ok = {}, True
    for n in names:
        r, good = parts[n](run)
        res[n] = {"ok": good, **r}
        ok = ok and good
    return res, ok


HANDLERS = {"spectrum": cmd_spectrum, "weyl": cmd_weyl, "measure": cmd_measure, "kernel-check": cmd_kernel_check,
            "gauge": cmd_gauge, "radial": cmd_radial, "two-spectra": cmd_two_spectra, "verify": cmd_verify}


# ---------------------------------------------------------------------------


def _provenance(args, settings: PropagationSettings):
    return {"package": "diracweyl", "version": __version__, "numpy": np.__version__,
            "python": platform.python_version(),
            "settings": {"propagation": settings.to_json(), "tol": args.tol, "seed": args.seed,
                         "window": args.window, "eps": args.eps,
                         "c_grid": None if args.c_grid is None else args.c_grid.tolist(),
                         "z": None if args.z is None else [[z.real, z.imag] for z in args.z],
                         "wronskian": "bilinear f1 g2 - f2 g1", "stieltjes": "M(lambda + i eps), eps -> 0+",
                         "e_function": "auto-selected Phi1 -/+ i Phi2 with K(i, i, c) > 0"}}


def _report(args, problem, status, results, error=None):
    return {"command": args.command, "status": status,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "problem": None if problem is None else problem.to_json(),
            "provenance": _provenance(args, DEFAULT_SETTINGS), "results": results, "error": error}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    problem = None
    try:
        problem = load_problem(args.problem)
        r = Run(args, problem)
        results, ok = HANDLERS[args.command](r)
    except (ConfigurationError, HypothesisError, ParseError, EvaluationDomainError, ValueError) as exc:
        print(f"diracweyl: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        rep = _report(args, problem, "error", None, {"type": type(exc).__name__, "message": str(exc)})
        write_atomic(out / "report.json", json.dumps(_clean(rep), indent=2, sort_keys=True) + "\n")
        print(f"diracweyl: computation failed: {exc}", file=sys.stderr)
        return 1
    for name, text in r.tables.items():
        write_atomic(out / name, text)
    rep = _report(args, problem, "ok" if ok else "failed", results)
    write_atomic(out / "report.json", json.dumps(_clean(rep), indent=2, sort_keys=True) + "\n")
    print(json.dumps(_clean({"command": args.command, "status": rep["status"], "out": str(out)})))
    return 0 if ok else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
