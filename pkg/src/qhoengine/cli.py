"""Command-line driver: parameter sweeps written as CSV.

Configuration is plain ``key=value`` text, one entry per line, ``#`` starts
a comment. Axes are given as ``sweep.x = name:min:max:count[:lin|log]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from . import floquet, nonmarkov, thermo, weakcoupling
from .numerics import NumericsError, QuadratureSpec
from .spectral import BathConfig, Lorentzian, Ohmic, PowerLaw

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICS, EXIT_VALIDATION = 0, 2, 3, 4

SUBCOMMANDS = ("point", "sweep", "weak-vs-full", "nonmarkov", "noengine", "otto", "validate")

DEFAULTS = {
    "omega0": 1.0,
    "T1": 0.2,
    "T2": 2.0,
    "kappa": 1e-3,
    "bath1.kind": "lorentzian",
    "bath1.gamma1": 0.02,
    "bath1.omega1": 0.7,
    "bath1.s": 1.0,
    "bath1.omegabar": 1.0,
    "bath2.gamma2": 0.02,
    "quad.reltol": 1e-8,
}
NUMERIC_KEYS = ("omega0", "Omega", "T1", "T2", "kappa", "bath1.gamma1", "bath1.omega1",
                "bath1.s", "bath1.omegabar", "bath1.omegac", "bath2.gamma2",
                "quad.reltol", "quad.omegamax")
OTHER_KEYS = ("bath1.kind", "floquet.M", "sweep.x", "sweep.y", "out")
KINDS = ("ohmic", "lorentzian", "powerlaw")
# short axis names accepted alongside the full keys
ALIASES = {"omega1": "bath1.omega1", "gamma1": "bath1.gamma1", "gamma2": "bath2.gamma2",
           "s": "bath1.s", "omegabar": "bath1.omegabar", "omegac": "bath1.omegac"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    name: str       # as written by the user; also the CSV column
    key: str        # canonical config key
    lo: float
    hi: float
    count: int
    spacing: str = "lin"

    def values(self):
        if self.count == 1:
            return np.array([self.lo])
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class SweepSpec:
    subcommand: str
    params: dict
    axes: list = field(default_factory=list)
    out: str | None = None
    workers: int = 1

    def points(self):
        """Parameter dicts in row-major axis order."""
        if not self.axes:
            return [(dict(self.params), {})]
        grids = [a.values() for a in self.axes]
        out = []
        for idx in np.ndindex(*(len(g) for g in grids)):
            p = dict(self.params)
            shown = {}
            for a, g, i in zip(self.axes, grids, idx):
                p[a.key] = float(g[i])
                shown[a.name] = float(g[i])
            out.append((p, shown))
        return out


def _parse_axis(text, where):
    parts = [t.strip() for t in text.split(":")]
    if len(parts) not in (4, 5):
        raise ConfigError(f"{where}: axis must be name:min:max:count[:lin|log]")
    name = parts[0]
    key = ALIASES.get(name, name)
    if key not in NUMERIC_KEYS:
        raise ConfigError(f"{where}: cannot sweep unknown parameter '{name}'")
    try:
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise ConfigError(f"{where}: unparsable axis bounds or count") from None
    spacing = parts[4] if len(parts) == 5 else "lin"
    if spacing not in ("lin", "log"):
        raise ConfigError(f"{where}: spacing must be lin or log")
    if count < 1:
        raise ConfigError(f"{where}: axis count must be at least 1")
    if count > 1 and not lo < hi:
        raise ConfigError(f"{where}: axis needs min < max")
    if spacing == "log" and lo <= 0:
        raise ConfigError(f"{where}: log axis needs positive bounds")
    return Axis(name, key, lo, hi, count, spacing)


def parse_config(text: str, subcommand: str = "sweep") -> SweepSpec:
    """Parse ``key=value`` text into a validated SweepSpec."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    params = dict(DEFAULTS)
    axes = {}
    out = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        where = f"line {lineno} ({key})"
        if key in NUMERIC_KEYS:
            try:
                params[key] = float(value)
            except ValueError:
                raise ConfigError(f"{where}: unparsable number '{value}'") from None
        elif key == "bath1.kind":
            if value not in KINDS:
                raise ConfigError(f"{where}: kind must be one of {', '.join(KINDS)}")
            params[key] = value
        elif key == "floquet.M":
            try:
                params[key] = int(value)
            except ValueError:
                raise ConfigError(f"{where}: truncation must be an integer") from None
        elif key in ("sweep.x", "sweep.y"):
            axes[key] = _parse_axis(value, where)
        elif key == "out":
            out = value
        else:
            raise ConfigError(f"{where}: unknown key")
    spec = SweepSpec(subcommand, params, [axes[k] for k in ("sweep.x", "sweep.y") if k in axes], out)
    _validate_spec(spec)
    return spec


def _validate_spec(spec: SweepSpec):
    p = spec.params
    swept = {a.key for a in spec.axes}
    checks = [("kappa", lambda v: v >= 0, "must be non-negative"),
              ("T1", lambda v: v >= 0, "must be non-negative"),
              ("T2", lambda v: v >= 0, "must be non-negative"),
              ("Omega", lambda v: v > 0, "must be positive"),
              ("omega0", lambda v: v > 0, "must be positive"),
              ("bath1.gamma1", lambda v: v >= 0, "must be non-negative"),
              ("bath1.omega1", lambda v: v > 0, "must be positive"),
              ("bath2.gamma2", lambda v: v >= 0, "must be non-negative"),
              ("bath1.s", lambda v: v > 0, "must be positive"),
              ("quad.reltol", lambda v: 0 < v < 1, "must lie in (0, 1)"),
              ("floquet.M", lambda v: v >= 0, "must be non-negative")]
    for key, ok, msg in checks:
        if key in p and not ok(p[key]):
            raise ConfigError(f"{key}: {msg}")
    for a in spec.axes:
        for v in (a.lo, a.hi):
            for key, ok, msg in checks:
                if key == a.key and not ok(v):
                    raise ConfigError(f"{a.name} axis: {msg}")
    needs_omega = spec.subcommand in ("point", "sweep", "weak-vs-full", "otto", "noengine")
    if needs_omega and "Omega" not in p and "Omega" not in swept:
        raise ConfigError("Omega: required for this subcommand")
    if spec.subcommand == "point" and spec.axes:
        raise ConfigError("point takes no sweep axes")


# -- building physical configs -------------------------------------------------

def _bath1(p):
    kind = p["bath1.kind"]
    if kind == "lorentzian":
        sd = Lorentzian.from_kappa(p["kappa"], p["bath1.gamma1"], p["bath1.omega1"], p["omega0"])
    elif kind == "ohmic":
        sd = Ohmic(p["bath1.gamma1"])
    else:
        sd = PowerLaw(p["bath1.gamma1"], p["bath1.s"], p["bath1.omegabar"],
                      p.get("bath1.omegac", 1e4))
    return BathConfig(sd, p["T1"])


def engine_config(p) -> thermo.EngineConfig:
    quad = QuadratureSpec(rel_tol=p["quad.reltol"], omega_max=p.get("quad.omegamax"))
    return thermo.EngineConfig(p["Omega"], _bath1(p), BathConfig(Ohmic(p["bath2.gamma2"]), p["T2"]),
                               omega0=p["omega0"], quad=quad, M=p.get("floquet.M"))


# -- per-point evaluators ------------------------------------------------------
# Each returns a list of rows (dicts); the fixed columns come first.

THERMO_COLUMNS = ("Omega", "omega1", "kappa", "T1", "T2", "P", "P_over_gamma2sq", "P_a",
                  "P_b1", "P_b2", "J1", "J2", "J2_a", "J2_b", "eta", "eta_over_etaC",
                  "eta_1", "eta_2", "regime", "balance_residual", "M_used", "omega1_res",
                  "status", "error")
WEAK_COLUMNS = ("Omega", "omega1", "kappa", "T1", "T2", "P_full", "P_weak", "rel_gap",
                "J1_weak", "J2_weak", "validity_ratio", "status", "error")
NM_COLUMNS = ("T1", "Gamma", "Delta", "Pi", "N_p", "status", "error")
NOENGINE_COLUMNS = ("s", "Omega", "T1", "f_s", "g", "engine_possible", "excluded", "status", "error")
OTTO_COLUMNS = ("p", "Omega", "T1", "T2", "omega_high", "omega_low", "N_A", "N_B", "N_C", "N_D",
                "Q1", "Q2", "W", "tau1", "tau2", "tau_is", "eta", "is_engine", "engine_condition",
                "P_channel", "J1_channel", "J2_channel", "status", "error")
COLUMNS = {"point": THERMO_COLUMNS, "sweep": THERMO_COLUMNS, "weak-vs-full": WEAK_COLUMNS,
           "nonmarkov": NM_COLUMNS, "noengine": NOENGINE_COLUMNS, "otto": OTTO_COLUMNS}


def _base(p, keys=("Omega", "omega1", "kappa", "T1", "T2")):
    row = {}
    for k in keys:
        key = ALIASES.get(k, k)
        row[k] = p.get(key, "")
    return row


def _resonance(p):
    if p["bath1.kind"] != "lorentzian" or p["kappa"] == 0:
        return ""
    try:
        _, w1, _ = floquet.detuned_resonance(
            p["kappa"], p["bath1.gamma1"], BathConfig(Ohmic(p["bath2.gamma2"]), p["T2"]),
            omega0=p["omega0"], Omega=p["Omega"], temperature1=p["T1"])
        return w1
    except (NumericsError, ValueError):
        return ""


def eval_thermo(p):
    row = _base(p)
    try:
        r = thermo.full_report(engine_config(p))
        row.update(P=r.P, P_over_gamma2sq=r.P_over_gamma2sq, P_a=r.P_a, P_b1=r.P_b1,
                   P_b2=r.P_b2, J1=r.J1, J2=r.J2, J2_a=r.J2_a, J2_b=r.J2_b, eta=r.eta,
                   eta_over_etaC=r.eta_over_etaC, eta_1=r.eta_1, eta_2=r.eta_2,
                   regime=r.regime, balance_residual=r.balance_residual, M_used=r.M,
                   omega1_res=_resonance(p), status="ok", error="")
    except (NumericsError, ValueError) as exc:
        row.update(status="failed", error=str(exc))
    return [row]


def eval_weak_vs_full(p):
    row = _base(p)
    try:
        cfg = engine_config(p)
        full = thermo.full_report(cfg).P
        weak = weakcoupling.weak_power(cfg)
        j1, j2 = weakcoupling.weak_currents(cfg)
        row.update(P_full=full, P_weak=weak, rel_gap=abs(full - weak) / abs(weak) if weak else math.inf,
                   J1_weak=j1, J2_weak=j2, validity_ratio=weakcoupling.validity_ratio(cfg),
                   status="ok", error="")
    except (NumericsError, ValueError) as exc:
        row.update(status="failed", error=str(exc))
    return [row]


def eval_nonmarkov(p):
    row = {"T1": p["T1"]}
    try:
        cutoff = p.get("bath1.omegac")
        if p["bath1.kind"] == "ohmic" and cutoff is None:
            cutoff = 1e4
        c = nonmarkov.nm_coefficients(_bath1(p), p["omega0"], cutoff)
        row.update(Gamma=c.Gamma, Delta=c.Delta, Pi=c.Pi, N_p=c.N_p, status="ok", error="")
    except (NumericsError, ValueError) as exc:
        row.update(status="failed", error=str(exc))
    return [row]


def eval_noengine(p):
    row = {"s": p["bath1.s"], "Omega": p["Omega"], "T1": p["T1"]}
    try:
        c = weakcoupling.no_engine_certificate(p["bath1.s"], p["Omega"], p["T1"], p["omega0"])
        row.update(f_s=c.f_s, g=c.g, engine_possible=c.engine_possible, excluded=c.excluded,
                   status="excluded" if c.excluded else "ok", error="")
    except ValueError as exc:
        row.update(status="failed", error=str(exc))
    return [row]


def eval_otto(p):
    rows = []
    for ch in (1, -1):
        row = {"p": ch, "Omega": p["Omega"], "T1": p["T1"], "T2": p["T2"]}
        try:
            cfg = engine_config(p)
            o = weakcoupling.otto_cycle(ch, cfg)
            P, J1, J2 = weakcoupling.channel(cfg, ch)
            row.update(omega_high=o.omega_high, omega_low=o.omega_low, N_A=o.N_A, N_B=o.N_B,
                       N_C=o.N_C, N_D=o.N_D, Q1=o.Q1, Q2=o.Q2, W=o.W, tau1=o.tau1,
                       tau2=o.tau2, tau_is=o.tau_is, eta=o.eta, is_engine=o.is_engine,
                       engine_condition=weakcoupling.otto_engine_condition(ch, cfg),
                       P_channel=P, J1_channel=J1, J2_channel=J2, status="ok", error="")
        except (NumericsError, ValueError) as exc:
            row.update(status="failed", error=str(exc))
        rows.append(row)
    return rows


EVALUATORS = {"point": eval_thermo, "sweep": eval_thermo, "weak-vs-full": eval_weak_vs_full,
              "nonmarkov": eval_nonmarkov, "noengine": eval_noengine, "otto": eval_otto}


def _work(job):
    sub, params, shown = job
    rows = EVALUATORS[sub](params)
    for r in rows:
        r.update(shown)
    return rows


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def run_sweep(spec: SweepSpec, stream, quiet: bool = True):
    """Evaluate every grid point and write CSV to ``stream``; returns failed-row count."""
    columns = list(COLUMNS[spec.subcommand])
    extra = [a.name for a in spec.axes if a.name not in columns]
    columns = extra + columns
    jobs = [(spec.subcommand, p, shown) for p, shown in spec.points()]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    failed = 0

    def emit(rows, i):
        nonlocal failed
        for r in rows:
            failed += r.get("status") == "failed"
            writer.writerow([_fmt(r.get(c, "")) for c in columns])
        if not quiet:
            print(f"[{i + 1}/{len(jobs)}]", file=sys.stderr)

    if spec.workers > 1 and len(jobs) > 1:
        with Pool(spec.workers) as pool:
            for i, rows in enumerate(pool.imap(_work, jobs, chunksize=1)):
                emit(rows, i)
    else:
        for i, job in enumerate(jobs):
            emit(_work(job), i)
    return failed


# -- validation suite ------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


def _check_balance(p):
    worst = 0.0
    for Om, w1, kap in ((p.get("Omega", 0.3), p["bath1.omega1"], p["kappa"]), (0.6, 0.4, 0.1),
                        (0.3, 0.7, 0.5)):
        q = dict(p, Omega=Om, **{"bath1.omega1": w1, "kappa": kap})
        r = thermo.full_report(engine_config(q), strict=False)
        worst = max(worst, r.balance_residual / r.balance_scale)
    return Check("first_law", worst <= thermo.BALANCE_TOL, worst, thermo.BALANCE_TOL,
                 "|P+J1+J2| / scale, J1 from the bath-1 force")


def _check_floquet(p):
    M = p.get("floquet.M")
    q = dict(p, kappa=0.1, Omega=p.get("Omega", 0.6), **{"bath1.omega1": 0.4})
    k = engine_config(q).kernels()
    M_used = floquet.DEFAULT_M if M is None else M
    rng = np.random.default_rng(0)
    w = rng.uniform(-3, 3, 100)
    sol = floquet.solve_floquet_batch(k, w, M_used)
    neg = floquet.solve_floquet_batch(k, -w, M_used)
    worst = 0.0
    for mu in range(-2 * M_used, 2 * M_used + 1, 2):
        worst = max(worst, np.max(np.abs(np.conj(sol.G(mu)) - neg.G(-mu))))
        a = floquet.solve_floquet_batch(k, w - mu * k.Omega / 2, M_used).G(mu)
        b = floquet.solve_floquet_batch(k, w + mu * k.Omega / 2, M_used).G(-mu)
        worst = max(worst, np.max(np.abs(a - b)))
    # a truncation that has not converged breaks the recursion beyond its edge
    diff, _ = floquet.truncation_difference(k, w, M_used)
    scale = max(np.max(np.abs(sol.values)), 1e-300)
    worst = max(worst, diff / scale)
    return Check("floquet_symmetry", worst <= 1e-10, worst, 1e-10,
                 "conjugation and shift symmetries plus truncation convergence, kappa=0.1")


def _check_markov(p):
    worst = math.inf
    for T1 in (50.0, 100.0):
        for Om in (0.2, 0.7, 1.5):
            q = dict(p, T1=T1, Omega=Om, **{"bath1.kind": "ohmic"})
            r = thermo.full_report(engine_config(q), strict=False)
            worst = min(worst, r.P, r.P_b1, r.P_b2)
    return Check("markov_positivity", worst >= -1e-8, worst, -1e-8,
                 "min of P, P^(b,1), P^(b,2) for Ohmic bath 1 at high T1")


def _check_certificate(p):
    worst = -math.inf
    for s in (0.25, 0.5, 0.75, 1.0):
        for Om in np.linspace(0.05, 2.95, 30):
            for T1 in np.geomspace(0.01, 100, 30):
                c = weakcoupling.no_engine_certificate(s, Om, T1)
                if not c.excluded:
                    worst = max(worst, math.log(c.f_s) - math.log(c.g))
    return Check("noengine_certificate", worst <= 0, worst, 0.0, "max log(f_s / g)")


def _check_weak(p):
    # weak coupling is only asserted where the validity monitor allows it
    q = dict(p, Omega=p.get("Omega", 0.3))
    cfg = engine_config(q)
    if q["bath1.kind"] != "lorentzian":
        return Check("weak_vs_full", True, 0.0, 0.02, "skipped: bath 1 is not Lorentzian")
    kap = min(q["kappa"], weakcoupling.VALIDITY_RATIO * q["bath1.gamma1"] * q["bath2.gamma2"]
              / q["omega0"] ** 2)
    cfg = thermo.with_kappa(cfg, kap)
    full, weak = thermo.full_report(cfg, strict=False).P, weakcoupling.weak_power(cfg)
    gap = abs(full - weak) / abs(weak)
    return Check("weak_vs_full", gap <= 0.02, gap, 0.02, f"relative gap at kappa={kap:.3g}")


def validate(spec: SweepSpec):
    checks = []
    for fn in (_check_balance, _check_floquet, _check_markov, _check_certificate, _check_weak):
        try:
            checks.append(fn(spec.params))
        except (NumericsError, ValueError) as exc:
            checks.append(Check(fn.__name__.removeprefix("_check_"), False, math.nan, math.nan,
                                f"error: {exc}"))
    return checks


def _write_checks(checks, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["check", "passed", "measured", "tolerance", "detail"])
    for c in checks:
        w.writerow([c.name, _fmt(c.passed), _fmt(float(c.measured)), _fmt(float(c.tolerance)), c.detail])


# -- entry point ---------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="qhoengine", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="extra configuration entries, applied after --config")
    ap.add_argument("--out", help="output CSV path (default: stdout)")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        text += "\n" + "\n".join(args.set)
        spec = parse_config(text, args.subcommand)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        spec.workers = args.workers
        if args.out:
            spec.out = args.out
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    buf = io.StringIO()
    if spec.subcommand == "validate":
        checks = validate(spec)
        _write_checks(checks, buf)
        status = EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION
    else:
        failed = run_sweep(spec, buf, quiet=args.quiet)
        status = EXIT_NUMERICS if failed else EXIT_OK
    if spec.out:
        with open(spec.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return status


if __name__ == "__main__":
    sys.exit(main())
