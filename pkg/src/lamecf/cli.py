"""Command-line front end.

Every subcommand writes one JSON document (or, for ``cm integrate
--format csv``, a trajectory CSV).  Exit status is 0 on success, 2 when a
result is flagged invalid, 1 on a numerical or I/O error and 64 on a usage
error.

Option values are resolved in the order: command-line flag, config file
(``--config``, flat ``key = value`` lines), environment variable
``LAMECF_<KEY>`` (tolerances only), built-in default.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED, EXIT_USAGE = 0, 1, 2, 64
ENV_PREFIX = "LAMECF_"
TOLERANCE_KEYS = ("rtol", "atol", "ftol", "threshold", "tol")

DEFAULTS = {
    "alpha0": 0.0,
    "p0": 0.0,
    "z": "0.3+0.2j",
    "labeling": "standard",
    "convention": "printed",
    "w": "0.3",
    "n": 40,
    "degree": 3,
    "q_grid": "0.005,0.01,0.015,0.02,0.025,0.03",
    "order": 2,
    "gamma": 0.5,
    "p": 0.0,
    "samples": 100000,
    "seed": 0,
    "modes": 1000,
    "x": 0.2,
    "y": 0.7,
    "a": 0.2,
    "b": "-0.06-0.4j",
    "m": 1.0,
    "nu": 0.0,
    "tau0": "0.35+12j",
    "tau1": "0.35+2.5j",
    "xi": "1",
    "gammas": "0.4,0.2,0.1,0.05",
    "constant": "printed",
    "rtol": 1e-11,
    "atol": 1e-13,
    "ftol": 1e-11,
    "threshold": 1e-7,
    "tol": 1e-6,
    "radius": None,
    "lam": None,
}


class UsageError(Exception):
    """Malformed command line or config file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- emission


def _jsonify(value) -> str:
    """Deterministic JSON text; floats use 17 significant digits."""
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return "null"
        text = format(v, ".17g")
        if "e" not in text and "." not in text and "n" not in text:
            text += ".0"
        return text
    if isinstance(value, (complex, np.complexfloating)):
        v = complex(value)
        return '{"re": %s, "im": %s}' % (_jsonify(v.real), _jsonify(v.imag))
    if isinstance(value, str):
        out = ['"']
        for ch in value:
            if ch in '"\\':
                out.append("\\" + ch)
            elif ord(ch) < 0x20:
                out.append("\\u%04x" % ord(ch))
            else:
                out.append(ch)
        out.append('"')
        return "".join(out)
    if isinstance(value, dict):
        return "{" + ", ".join(f"{_jsonify(str(k))}: {_jsonify(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_jsonify(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def decode_complex(obj):
    """``json.loads`` object hook turning ``{"re", "im"}`` pairs back into complex."""
    if isinstance(obj, dict) and set(obj) == {"re", "im"}:
        re_, im_ = obj["re"], obj["im"]
        return complex(math.nan if re_ is None else re_, math.nan if im_ is None else im_)
    return obj


def emit_report(results, fmt: str = "json", document: dict | None = None) -> str:
    """Render ``results`` (a list of records) as JSON or CSV text.

    With no ``document`` the JSON text is ``{"results": [...]}``; otherwise
    ``document`` supplies the surrounding keys and ``results`` is inserted
    after ``inputs``.  CSV accepts a list of flat records sharing keys.
    """
    if fmt == "json":
        if document is None:
            return _jsonify({"results": list(results)}) + "\n"
        doc = {}
        for k, v in document.items():
            doc[k] = v
            if k == "inputs":
                doc["results"] = list(results)
        doc.setdefault("results", list(results))
        return _jsonify(doc) + "\n"
    if fmt == "csv":
        results = list(results)
        if not results:
            return ""
        keys = list(results[0])
        lines = [",".join(keys)]
        for r in results:
            cells = []
            for k in keys:
                v = r.get(k)
                if isinstance(v, (complex, np.complexfloating)):
                    cells.append(f"{complex(v).real:.17g}{complex(v).imag:+.17g}j")
                elif isinstance(v, (float, np.floating)):
                    cells.append(format(float(v), ".17g"))
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
    raise UsageError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------- config


def read_config(path: str) -> dict:
    """Flat ``key = value`` document; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise UsageError(f"{path}:{num}: empty key")
        out[key] = val
    return out


def _complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    s = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError as exc:
        raise UsageError(f"not a number: {text!r}") from exc


def _real(text) -> float:
    z = _complex(text)
    if z.imag != 0:
        raise UsageError(f"expected a real number, got {text!r}")
    return z.real


def _floats(text) -> list[float]:
    return [_real(t) for t in str(text).split(",") if t.strip()]


@dataclass
class RunConfig:
    """Resolved options of one invocation."""

    command: tuple
    values: dict
    output: str | None = None
    fmt: str = "json"
    jobs: int = 1
    verbose: int = 0
    explicit: set = field(default_factory=set)

    def get(self, key):
        return self.values.get(key, DEFAULTS.get(key))

    def real(self, key) -> float:
        return _real(self.get(key))

    def cplx(self, key) -> complex:
        return _complex(self.get(key))

    def tolerance(self, key) -> float:
        v = self.real(key)
        if not v > 0:
            raise UsageError(f"tolerance {key} must be positive")
        return v

    def torus(self, required=True):
        from .elliptic import Torus

        q, tau = self.values.get("q"), self.values.get("tau")
        if q is not None and tau is not None:
            raise UsageError("give exactly one of --q and --tau")
        if q is None and tau is None:
            if required:
                raise UsageError("one of --q or --tau is required")
            return None
        try:
            return Torus.from_q(_complex(q)) if q is not None else Torus(_complex(tau))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def echo(self) -> dict:
        keys = sorted(k for k in self.values if self.values[k] is not None)
        return {k: (str(self.values[k])) for k in keys}


# ---------------------------------------------------------------- commands


def _lame_params(cfg):
    from .lame import LameParams

    try:
        return LameParams(cfg.real("alpha0"), cfg.real("p0"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_theta(cfg):
    from .elliptic import theta1, theta2, theta3

    T, z = cfg.torus(), cfg.cplx("z")
    return [{"z": z, "tau": T.tau, "q": T.q, "theta1": theta1(z, T), "theta2": theta2(z, T), "theta3": theta3(z, T)}], {}, False


def cmd_wp(cfg):
    from .elliptic import wp, wp_prime

    T, z = cfg.torus(), cfg.cplx("z")
    return [{"z": z, "tau": T.tau, "wp": wp(z, T), "wp_prime": wp_prime(z, T)}], {}, False


def cmd_roots(cfg):
    from .elliptic import half_period_roots

    r = half_period_roots(cfg.torus(), cfg.get("labeling"))
    return [{"e1": r.e1, "e2": r.e2, "e3": r.e3, "g2": r.g2, "g3": r.g3, "labeling": r.labeling}], {}, False


def cmd_gamma_tilde(cfg):
    from .lame import gamma_tilde

    z = cfg.cplx("z")
    return [{"z": z, "gamma_tilde": complex(gamma_tilde(z, _lame_params(cfg), cfg.torus()))}], {}, False


def _accessory(cfg):
    from .lame import accessory_report

    rep = accessory_report(_lame_params(cfg), cfg.torus(), threshold=cfg.tolerance("threshold"))
    return rep


def cmd_accessory(cfg):
    rep = _accessory(cfg)
    res = {"accessory": rep.accessory, "spread": rep.spread, "residual": rep.residual, "valid": rep.valid}
    diag = {"probes": list(rep.probes), "values": list(rep.values), "threshold": rep.threshold}
    return [res], diag, not rep.valid


def _heun(cfg):
    from .floquet import build_heun

    return build_heun(_lame_params(cfg), cfg.torus(), cfg.get("convention"))


def _floquet_record(sol, prob):
    return {
        "w": sol.w,
        "Lambda": sol.Lambda,
        "T": prob.T,
        "matching_residual": sol.residual,
        "iterations": sol.iterations,
        "depth": sol.N,
        "flagged": sol.flagged,
        "notes": list(sol.notes),
    }


def cmd_floquet(cfg):
    from . import floquet as F

    sub = cfg.command[1]
    prob = _heun(cfg)
    if sub == "solve-lambda":
        p = prob.with_(w=cfg.cplx("w"))
        sol = F.solve_lambda(p, ftol=cfg.tolerance("ftol"))
        return [_floquet_record(sol, p)], {}, sol.flagged
    if sub == "solve-w":
        if cfg.get("lam") is None:
            raise UsageError("solve-w needs --lambda")
        p = prob.with_(Lambda=cfg.cplx("lam"))
        sol = F.solve_w(p, ftol=cfg.tolerance("ftol"))
        return [_floquet_record(sol, p)], {}, sol.flagged
    if sub == "oracle":
        p = prob.with_(w=cfg.cplx("w"))
        vals = F.tridiag_oracle(p, int(cfg.real("n")))
        return [{"w": p.w, "T": p.T, "N": int(cfg.real("n")), "eigenvalues": list(vals)}], {}, False
    if sub == "qseries":
        res = F.lambda_qseries(
            _lame_params(cfg),
            cfg.cplx("w"),
            _floats(cfg.get("q_grid")),
            int(cfg.real("degree")),
            tol=cfg.tolerance("tol"),
            convention=cfg.get("convention"),
        )
        rec = {"coefficients": list(res.coefficients), "loo_variation": res.loo_variation, "flagged": res.flagged}
        return [rec], {"q": list(res.q), "Lambda": list(res.Lambda)}, res.flagged
    raise UsageError(f"unknown floquet subcommand {sub}")


def _gmc_torus(cfg):
    T = cfg.torus(required=False)
    return None if T is None or T.is_cusp else T


def cmd_gmc(cfg):
    from . import gmc

    sub = cfg.command[1]
    if sub == "moment-check":
        chk = gmc.moment_check(
            int(cfg.real("order")),
            cfg.real("gamma"),
            cfg.real("p"),
            _gmc_torus(cfg),
            int(cfg.real("samples")),
            seed=int(cfg.real("seed")),
            N=int(cfg.real("modes")),
            jobs=cfg.jobs,
        )
        rec = {
            "order": chk.order,
            "estimate": chk.estimate,
            "stderr": chk.stderr,
            "oracle": chk.oracle,
            "z_score": chk.z,
            "samples": chk.samples,
            "flagged": chk.flagged,
        }
        return [rec], {"notes": list(chk.notes)}, chk.flagged or not chk.z < 3
    if sub == "covariance":
        x, y = cfg.real("x"), cfg.real("y")
        return [{"x": x, "y": y, "covariance": gmc.covariance(x, y, _gmc_torus(cfg))}], {}, False
    raise UsageError(f"unknown gmc subcommand {sub}")


def _cm_seed(cfg):
    from .calogero import MonodromySeed

    try:
        return MonodromySeed(cfg.cplx("a"), cfg.cplx("b"), cfg.real("m"), cfg.real("nu"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _cm_traj(cfg, seed=None):
    from .calogero import integrate

    return integrate(
        seed or _cm_seed(cfg),
        cfg.cplx("tau0"),
        cfg.cplx("tau1"),
        rtol=cfg.tolerance("rtol"),
        atol=cfg.tolerance("atol"),
    )


def _fit_record(fit):
    return {
        "tau_star": fit.tau_star,
        "c1": fit.c1,
        "c2": fit.c2,
        "branch": fit.branch,
        "c1_modulus_error": fit.c1_modulus_error,
        "H_star_fit": fit.H_star_fit,
        "H_star_direct": fit.H_star_direct,
        "H_star_shifted": fit.H_star_shifted,
        "matched_normalization": fit.matched_normalization,
        "fit_residual": fit.fit_residual,
        "flagged": fit.flagged,
    }


def cmd_cm(cfg):
    from . import calogero as C

    sub = cfg.command[1]
    if sub == "integrate":
        tr = _cm_traj(cfg)
        if cfg.fmt == "csv":
            return C.trajectory_csv(tr), {}, tr.truncated
        rec = {
            "samples": len(tr.tau),
            "tau_end": tr.tau[-1],
            "u_end": tr.u[-1],
            "v_end": tr.v[-1],
            "H_end": tr.H[-1],
            "action_end": tr.S[-1],
            "truncated": tr.truncated,
            "events": [{"kind": e.kind, "tau": e.tau, "u": e.u, "distance": e.distance} for e in tr.events],
        }
        diag = {"energy_balance": C.energy_balance_residual(tr) if not tr.truncated else None}
        return [rec], diag, tr.truncated
    if sub == "zero-fit":
        fit = C.zero_expansion_fit(_cm_traj(cfg))
        return [_fit_record(fit)], {}, fit.flagged
    if sub == "compare":
        params = _lame_params(cfg)
        seed = C.MonodromySeed.from_lame(params.alpha0, cfg.cplx("a"), cfg.cplx("b"), cfg.real("nu"))
        rep = C.accessory_hamiltonian_compare(
            params, seed, cfg.cplx("tau0"), cfg.cplx("tau1"), rtol=cfg.tolerance("rtol"), atol=cfg.tolerance("atol")
        )
        return [rep], {"note": "exploratory comparison; no pass/fail"}, False
    raise UsageError(f"unknown cm subcommand {sub}")


def cmd_gammae(cfg):
    from . import gammae as G

    sub = cfg.command[1]
    if sub == "B":
        val = G.semiclassical_B(_lame_params(cfg), constant=cfg.get("constant"))
        return [{"alpha0": cfg.real("alpha0"), "P0": cfg.real("p0"), "B": val, "constant": cfg.get("constant")}], {}, False
    if sub == "asymptote":
        rows = G.asymptote_check(cfg.cplx("xi"), _floats(cfg.get("gammas")))
        recs = [{"gamma": r.gamma, "shifts": r.shifts, "bracket": r.bracket, "limit": r.limit, "gap": r.gap} for r in rows]
        gaps = [r.gap for r in rows]
        monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
        return recs, {"monotone": monotone}, not monotone
    raise UsageError(f"unknown gammae subcommand {sub}")


def certify_roundtrip(cfg):
    """accessory -> Lambda map -> solve_w -> Floquet series residual."""
    from . import floquet as F

    tol = cfg.tolerance("tol")
    rep = _accessory(cfg)
    prob = F.build_heun(_lame_params(cfg), cfg.torus(), "lame")
    lam = F.lambda_from_lame_accessory(rep.accessory, prob, params=_lame_params(cfg))
    p = prob.with_(Lambda=lam)
    sol = F.solve_w(p, ftol=cfg.tolerance("ftol"))
    r = cfg.get("radius")
    r = abs(p.T) / 2 if r is None else _real(r)
    try:
        res = F.ode_residual(sol, p, r)
        err = None
    except F.SeriesDivergenceError as exc:
        res, err = None, str(exc)
    passed = res is not None and res < tol
    rec = {
        "accessory": rep.accessory,
        "accessory_valid": rep.valid,
        "Lambda": lam,
        "w": sol.w,
        "T": p.T,
        "radius": r,
        "ode_residual": res,
        "tolerance": tol,
        "pass": passed,
    }
    diag = {"error": err} if err else {}
    return [rec], diag, not (passed and rep.valid)


def certify_suite(cfg):
    """A fixed, seeded battery of fast checks; output is deterministic."""
    from . import calogero as C
    from . import elliptic as E
    from . import floquet as F
    from . import gammae as G
    from . import gmc
    from .lame import LameParams, accessory_report

    results = []

    def add(name, value, passed):
        results.append({"check": name, "value": value, "pass": bool(passed)})

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(cfg.real("seed")))))
    worst = 0.0
    for _ in range(20):
        T = E.Torus.from_q(rng.uniform(0.01, 0.3))
        z = complex(rng.uniform(0.05, 0.45), rng.uniform(0.05, 0.45) * T.tau.imag)
        r = E.half_period_roots(T)
        p, dp = complex(E.wp(z, T)), complex(E.wp_prime(z, T))
        worst = max(worst, abs(dp * dp - 4 * p**3 + r.g2 * p + r.g3) / (abs(dp) ** 2 + 1))
    add("weierstrass_cubic", worst, worst < 1e-9)

    a = accessory_report(LameParams(0.0, 0.7), E.Torus.from_q(0.05)).accessory
    exact = -math.pi**2 * 0.49 / 4
    add("accessory_alpha0_zero", abs(a - exact), abs(a - exact) < 1e-10)

    prob = F.build_heun(LameParams(1.0, 0.5), E.Torus.from_q(0.0)).with_(w=0.3)
    lam = F.solve_lambda(prob).Lambda
    add("floquet_T0", abs(lam + 0.39), abs(lam + 0.39) < 1e-12)

    prob = F.build_heun(LameParams(1.0, 0.5), E.Torus.from_q(0.02)).with_(w=0.3)
    sol = F.solve_lambda(prob)
    d = float(np.min(np.abs(F.tridiag_oracle(prob, 40) - sol.Lambda)))
    add("floquet_oracle", d, d < 1e-8)

    chk = gmc.moment_check(1, 0.5, 0.0, None, 4000, seed=int(cfg.real("seed")), N=200, jobs=cfg.jobs)
    add("gmc_unit_mean_z", chk.z, chk.z < 4)

    s0 = C.MonodromySeed(0.2, 0.1, 0.0)
    tr = C.integrate(s0, 0.35 + 12j, 0.35 + 5j)
    dev = float(np.max(np.abs(tr.u - (0.2 * tr.tau + 0.1))))
    add("cm_free_motion", dev, dev < 1e-12)

    B0 = G.semiclassical_B(LameParams(0.0, 0.7))
    add("gammae_B_alpha0_zero", B0, B0 == 0)
    ch = G.log_shift_ratio(G.GammaRatioChain(0.3 + 0.2j, 0.1, 5))
    parts = G.log_shift_ratio(G.GammaRatioChain(0.3 + 0.2j, 0.1, 2)) + G.log_shift_ratio(
        G.GammaRatioChain(0.5 + 0.2j, 0.1, 3)
    )
    add("gammae_chain", abs(ch - parts), abs(ch - parts) < 1e-12)

    dfc = gmc.df_constant(0, 0.5, 0.0, E.Torus.from_q(0.1))
    add("df_constant_N0", dfc, dfc == 1)
    return results, {}, not all(r["pass"] for r in results)


def cmd_certify(cfg):
    sub = cfg.command[1]
    if sub == "roundtrip":
        return certify_roundtrip(cfg)
    if sub == "suite":
        return certify_suite(cfg)
    raise UsageError(f"unknown certify subcommand {sub}")


COMMANDS = {
    "theta": cmd_theta,
    "wp": cmd_wp,
    "roots": cmd_roots,
    "gamma-tilde": cmd_gamma_tilde,
    "accessory": cmd_accessory,
    "floquet": cmd_floquet,
    "gmc": cmd_gmc,
    "cm": cmd_cm,
    "gammae": cmd_gammae,
    "certify": cmd_certify,
}

SUBCOMMANDS = {
    "floquet": ("solve-lambda", "solve-w", "oracle", "qseries"),
    "gmc": ("moment-check", "covariance"),
    "cm": ("integrate", "zero-fit", "compare"),
    "gammae": ("B", "asymptote"),
    "certify": ("roundtrip", "suite"),
}

# (flag, dest) for every parameter option; all default to None so that
# unspecified flags fall through to the config file and defaults.
OPTIONS = [
    ("--alpha0", "alpha0"),
    ("--p0", "p0"),
    ("--q", "q"),
    ("--tau", "tau"),
    ("--z", "z"),
    ("--labeling", "labeling"),
    ("--convention", "convention"),
    ("--w", "w"),
    ("--lambda", "lam"),
    ("--n", "n"),
    ("--degree", "degree"),
    ("--q-grid", "q_grid"),
    ("--order", "order"),
    ("--gamma", "gamma"),
    ("--p", "p"),
    ("--samples", "samples"),
    ("--seed", "seed"),
    ("--modes", "modes"),
    ("--x", "x"),
    ("--y", "y"),
    ("--a", "a"),
    ("--b", "b"),
    ("--m", "m"),
    ("--nu", "nu"),
    ("--tau0", "tau0"),
    ("--tau1", "tau1"),
    ("--xi", "xi"),
    ("--gammas", "gammas"),
    ("--constant", "constant"),
    ("--radius", "radius"),
    ("--rtol", "rtol"),
    ("--atol", "atol"),
    ("--ftol", "ftol"),
    ("--threshold", "threshold"),
    ("--tol", "tol"),
]
KNOWN_KEYS = {d for _, d in OPTIONS}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps and shards")
    common.add_argument("--verbose", "-v", action="count", default=0)
    for flag, dest in OPTIONS:
        common.add_argument(flag, dest=dest, default=None)

    # Options live on the leaf parsers only: argparse lets a subparser's
    # defaults overwrite values parsed by its parent.
    parser = _Parser(prog="lamecf", description="Semi-classical Lamé toolkit")
    parser.add_argument("--version", action="version", version=f"lamecf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[] if name in SUBCOMMANDS else [common])
        if name in SUBCOMMANDS:
            inner = sp.add_subparsers(dest="sub", required=True, parser_class=_Parser)
            for s in SUBCOMMANDS[name]:
                inner.add_parser(s, parents=[common])
    return parser


def resolve(argv) -> RunConfig:
    """Parse ``argv`` and merge the config file and environment."""
    ns = build_parser().parse_args(argv)
    file_vals = read_config(ns.config) if ns.config else {}
    unknown = set(file_vals) - KNOWN_KEYS - {"output", "format", "jobs"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values = {}
    explicit = set()
    for _, dest in OPTIONS:
        v = getattr(ns, dest)
        if v is not None:
            values[dest] = v
            explicit.add(dest)
        elif dest in file_vals:
            values[dest] = file_vals[dest]
        elif dest in TOLERANCE_KEYS and os.environ.get(ENV_PREFIX + dest.upper()):
            values[dest] = os.environ[ENV_PREFIX + dest.upper()]
    fmt = ns.format or file_vals.get("format", "json")
    if fmt not in ("json", "csv"):
        raise UsageError(f"unknown format {fmt!r}")
    jobs = ns.jobs if ns.jobs is not None else int(file_vals.get("jobs", 1))
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    command = (ns.command,) + ((ns.sub,) if getattr(ns, "sub", None) else ())
    if fmt == "csv" and command != ("cm", "integrate"):
        raise UsageError("--format csv is only available for 'cm integrate'")
    return RunConfig(command, values, ns.output or file_vals.get("output"), fmt, jobs, ns.verbose, explicit)


def dispatch(cfg: RunConfig) -> tuple[str, int]:
    """Run the command; return the rendered artifact and exit status."""
    start = time.perf_counter()
    results, diagnostics, flagged = COMMANDS[cfg.command[0]](cfg)
    if isinstance(results, str):
        return results, EXIT_FLAGGED if flagged else EXIT_OK
    doc = {
        "command": " ".join(cfg.command),
        "version": __version__,
        "inputs": cfg.echo(),
        "diagnostics": diagnostics,
        "flagged": bool(flagged),
        "meta": {"wall_time_s": time.perf_counter() - start},
    }
    return emit_report(results, "json", doc), EXIT_FLAGGED if flagged else EXIT_OK


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    try:
        text, status = dispatch(cfg)
        _write(text, cfg.output)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ArithmeticError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR
    return status


if __name__ == "__main__":
    sys.exit(main())
