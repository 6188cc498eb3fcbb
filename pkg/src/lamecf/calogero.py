r"""Non-autonomous elliptic Calogero-Moser dynamics in the modular parameter.

With ``tau`` as time, the state ``(u, v)`` evolves by

.. math::

    \frac{du}{d\tau} = \frac{v}{2\pi i}, \qquad
    \frac{dv}{d\tau} = \frac{m^2 \wp'(2u|\tau)}{2\pi i},

with Hamiltonian ``H = v^2 - m^2 wp(2u|tau)``, which is not conserved:
``dH/dtau = -m^2 (d_tau wp)(2u|tau)``.  The action
``S = int (v^2 + m^2 wp(2u)) dtau / (2 pi i)`` is carried as a third state
component.  Its momentum conjugate to ``u`` is ``2v``, so along a family of
trajectories sharing ``u(tau0)`` one has ``dS = 2 v du = v dz`` with
``z = 2u``.

Near a zero ``u(tau*) = 0``, ``u^2`` is analytic with
``u^2 = A s + B s^2 + ...`` (``s = tau - tau*``), where ``A = +-i m/(2 pi)``,
so ``u = c1 s^{1/2}(1 + (c2/c1) s + ...)`` with ``c1^2 = A``,
``2 c1 c2 = B`` and ``H(tau*) = -4 pi^2 B``.
"""

from __future__ import annotations

import cmath
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import Torus, eta1, wp, wp_prime
from .numerics import OdeError, OdeSpec, SingularityError, integrate_ode

__all__ = [
    "MonodromySeed",
    "SeedError",
    "CMTrajectory",
    "ZeroEvent",
    "ZeroFit",
    "HJResult",
    "eom_rhs",
    "hamiltonian",
    "dwp_dtau",
    "seed_at_infinity",
    "integrate",
    "energy_balance_residual",
    "action_hj_residual",
    "locate_zero",
    "zero_expansion_fit",
    "accessory_hamiltonian_compare",
    "trajectory_csv",
    "CSV_HEADER",
]

TWO_PI_I = 2j * math.pi
SINGULAR_FLOOR = 1e-9
CSV_HEADER = "re_tau,im_tau,re_u,im_u,re_v,im_v,re_H,im_H"


class SeedError(ValueError):
    """The asymptotic seed is not accurate at the requested ``tau0``."""

    def __init__(self, message, required_im_tau=None):
        super().__init__(message)
        self.required_im_tau = required_im_tau


@dataclass(frozen=True)
class MonodromySeed:
    """Asymptotic data ``u ~ a tau + b`` as ``tau -> i infinity``.

    ``nu`` is carried for bookkeeping of the B-cycle monodromy; it does not
    enter the two-term expansion.
    """

    a: complex
    b: complex
    m: float
    nu: float = 0.0

    def __post_init__(self):
        a = complex(self.a)
        if abs(2 * a - round(2 * a.real)) < 1e-12:
            raise ValueError(f"a = {a} is resonant (a in Z/2)")
        if self.m < 0:
            raise ValueError("m is taken non-negative")

    @classmethod
    def from_lame(cls, alpha0: float, a: complex, b: complex, nu: float = 0.0):
        """Seed with ``m = |2 - alpha0|``."""
        return cls(a, b, abs(2.0 - alpha0), nu)


def _torus(tau: complex) -> Torus:
    return Torus(tau)


def _half_lattice_distance(u: complex, tau: complex) -> float:
    """Distance from ``u`` to the nearest point of ``(Z + tau Z)/2``."""
    z = 2 * u
    n = round(z.imag / tau.imag)
    w = z - n * tau
    w -= round(w.real)
    cands = [w + i + j * tau for i in (-1, 0, 1) for j in (-1, 0, 1)]
    return min(abs(c) for c in cands) / 2


def eom_rhs(tau: complex, state, m: float):
    """Right-hand side for ``(u, v)`` or ``(u, v, S)``.

    Raises
    ------
    SingularityError
        If ``2u`` is within ``1e-9`` of the lattice.
    """
    state = np.asarray(state, dtype=complex)
    u, v = state[0], state[1]
    out = np.empty_like(state)
    out[0] = v / TWO_PI_I
    if m == 0:
        out[1] = 0
        if len(state) > 2:
            out[2] = v * v / TWO_PI_I
        return out
    T = _torus(tau)
    if _half_lattice_distance(u, T.tau) < SINGULAR_FLOOR:
        raise SingularityError(f"2u = {2 * u!r} at the lattice (tau = {tau!r})")
    out[1] = m * m * complex(wp_prime(2 * u, T, floor=0.0)) / TWO_PI_I
    if len(state) > 2:
        out[2] = (v * v + m * m * complex(wp(2 * u, T, floor=0.0))) / TWO_PI_I
    return out


def hamiltonian(tau: complex, u: complex, v: complex, m: float) -> complex:
    """``H = v^2 - m^2 wp(2u | tau)``."""
    if m == 0:
        return complex(v * v)
    return complex(v * v - m * m * wp(2 * u, _torus(tau), floor=0.0))


def dwp_dtau(z: complex, tau: complex, h: complex = 1e-6j) -> complex:
    """``d wp(z|tau) / d tau`` at fixed ``z`` by a centered difference."""
    return complex(
        (wp(z, _torus(tau + h), floor=0.0) - wp(z, _torus(tau - h), floor=0.0)) / (2 * h)
    )


def seed_at_infinity(seed: MonodromySeed, tau0: complex, tol: float = 1e-10):
    r"""``(u, v)`` at ``tau0`` from the two-term expansion.

    .. math::

        u = a\tau + b + \frac{m^2}{8\pi i a^2} E, \qquad
        v = 2\pi i\Big(a + \frac{m^2}{2a} E\Big), \qquad E = e^{4\pi i(a\tau+b)} .

    The neglected terms scale like ``|E|^2``, ``|q| |E|`` and ``|q|^2/|E|``
    (times the size of the correction coefficient); all must be below
    ``tol``.
    """
    a, b, m = complex(seed.a), complex(seed.b), seed.m
    tau0 = complex(tau0)
    E = cmath.exp(4j * math.pi * (a * tau0 + b))
    coef = m * m / (8j * math.pi * a * a)
    if m != 0:
        s1 = abs(E)
        qa = math.exp(-math.pi * tau0.imag)
        weight = max(1.0, abs(coef))
        scales = [s1 * s1, qa * s1, qa * qa / s1 if s1 > 0 else math.inf]
        worst = weight * max(scales)
        if not worst < tol:
            # Each scale decays exponentially in Im(tau); estimate the shift
            # that brings the worst one under tol.
            rate = min(4 * math.pi * abs(a.real), math.pi) or math.pi
            need = tau0.imag + math.log(worst / tol) / rate
            raise SeedError(
                f"asymptotic seed too inaccurate at Im(tau0) = {tau0.imag:g} "
                f"(neglected terms ~ {worst:.2e}); use Im(tau0) >= {need:.2f}",
                required_im_tau=need,
            )
    u = a * tau0 + b + coef * E
    v = TWO_PI_I * (a + m * m / (2 * a) * E)
    return complex(u), complex(v)


@dataclass(frozen=True)
class ZeroEvent:
    """Closest approach of the path to a zero of ``u`` (mod half periods)."""

    s: float
    tau: complex
    u: complex
    distance: float
    kind: str = "approach"


@dataclass
class CMTrajectory:
    """Sampled trajectory; ``S`` is the accumulated action."""

    tau: np.ndarray
    u: np.ndarray
    v: np.ndarray
    H: np.ndarray
    S: np.ndarray
    m: float
    seed: MonodromySeed | None
    spec: OdeSpec
    solution: object = field(repr=False)
    events: list = field(default_factory=list)
    truncated: bool = False
    message: str = ""

    def state_at(self, s: float) -> np.ndarray:
        """Dense state ``(u, v, S)`` at arc length ``s``."""
        return self.solution(s)


def _events(sol, m, tau_of_s, tol=1e-10):
    """Local minima of the half-lattice distance of ``u`` along the path."""
    if m == 0 or len(sol.s) < 3:
        return []
    d = np.array([_half_lattice_distance(y[0], t) for y, t in zip(sol.y, sol.t)])
    out = []
    for i in range(1, len(d) - 1):
        if d[i] <= d[i - 1] and d[i] <= d[i + 1]:
            lo, hi = sol.s[i - 1], sol.s[i + 1]
            f = lambda s: _half_lattice_distance(sol(s)[0], complex(tau_of_s(s)))
            # Golden-section search on the dense output.
            g = (math.sqrt(5) - 1) / 2
            c, e = hi - g * (hi - lo), lo + g * (hi - lo)
            fc, fe = f(c), f(e)
            while hi - lo > tol:
                if fc < fe:
                    hi, e, fe = e, c, fc
                    c = hi - g * (hi - lo)
                    fc = f(c)
                else:
                    lo, c, fc = c, e, fe
                    e = lo + g * (hi - lo)
                    fe = f(e)
            s = (lo + hi) / 2
            y = sol(s)
            out.append(ZeroEvent(float(s), complex(tau_of_s(s)), complex(y[0]), f(s)))
    return out


def integrate(
    seed: MonodromySeed,
    tau0: complex,
    tau1: complex,
    waypoints=(),
    rtol: float = 1e-11,
    atol: float = 1e-13,
    state0=None,
    max_steps: int = 200000,
) -> CMTrajectory:
    """Integrate from the asymptotic seed (or ``state0``) along a polygon.

    A singular encounter truncates the trajectory and records a
    ``"singular"`` event instead of raising.
    """
    m = seed.m
    if state0 is None:
        u0, v0 = seed_at_infinity(seed, tau0)
        state0 = (u0, v0, 0.0)
    spec = OdeSpec(
        t0=complex(tau0),
        t1=complex(tau1),
        y0=np.array(state0, dtype=complex),
        rtol=rtol,
        atol=atol,
        dense=True,
        waypoints=tuple(waypoints),
        max_steps=max_steps,
    )
    truncated, message = False, ""
    try:
        sol = integrate_ode(lambda t, y: eom_rhs(t, y, m), spec)
    except OdeError as exc:
        sol = exc.solution
        truncated, message = True, str(exc)
    H = np.array([hamiltonian(t, y[0], y[1], m) for t, y in zip(sol.t, sol.y)])
    events = _events(sol, m, sol.t_at) if len(sol.s) > 1 else []
    if truncated:
        events.append(
            ZeroEvent(float(sol.s[-1]), complex(sol.t[-1]), complex(sol.y[-1, 0]), 0.0, "singular")
        )
    return CMTrajectory(
        tau=sol.t.copy(),
        u=sol.y[:, 0].copy(),
        v=sol.y[:, 1].copy(),
        H=H,
        S=sol.y[:, 2].copy(),
        m=m,
        seed=seed,
        spec=spec,
        solution=sol,
        events=events,
        truncated=truncated,
        message=message,
    )


def energy_balance_residual(traj: CMTrajectory, points: int = 16, ds: float = 5e-3) -> float:
    """Largest ``|dH/dtau + m^2 (d_tau wp)(2u)| / (1 + |dH/dtau|)``.

    ``dH/dtau`` is a five-point difference of ``H`` on the dense output along
    the path (the interpolant error is amplified by ``1/ds``, so a wide
    high-order stencil beats a narrow centered one); ``d_tau wp`` is a
    centered difference in ``tau`` at fixed argument.
    """
    sol = traj.solution
    L = sol.length
    if L == 0:
        return 0.0
    ds = min(ds, 0.02 * L)
    s_pts = np.linspace(0.1 * L, 0.9 * L, points)
    weights = {-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12}
    worst = 0.0
    for s in s_pts:
        t0 = complex(sol.t_at(s))
        step = complex(sol.t_at(s + ds)) - t0
        dH = 0j
        for k, wgt in weights.items():
            y = sol(s + k * ds)
            dH += wgt * hamiltonian(complex(sol.t_at(s + k * ds)), y[0], y[1], traj.m)
        dH /= step
        y0 = sol(s)
        explicit = -traj.m**2 * dwp_dtau(2 * y0[0], t0) if traj.m else 0.0
        worst = max(worst, abs(dH - explicit) / (1 + abs(dH)))
    return worst


@dataclass(frozen=True)
class HJResult:
    """Hamilton-Jacobi residuals: ``family`` checks ``dS = 2 v du`` across two
    trajectories, ``flow`` checks ``dS/dtau = (v^2 + m^2 wp)/(2 pi i)``."""

    residual: float
    family: float
    flow: float
    flagged: bool
    delta: complex


def action_hj_residual(
    traj: CMTrajectory, window: tuple[float, float] | None = None, delta: float = 1e-4, points: int = 12
) -> HJResult:
    """Hamilton-Jacobi check of the accumulated action.

    A companion trajectory starts from the same ``u(tau0)`` with
    ``v(tau0) + delta``; at sample points in the arc-length ``window`` the
    action difference must equal ``(v1 + v2)(u2 - u1)`` (trapezoidal
    ``int 2 v du``), to relative accuracy.  The flow check compares a
    centered difference of ``S`` with the Lagrangian.
    """
    sol = traj.solution
    L = sol.length
    lo, hi = window if window is not None else (0.05 * L, 0.95 * L)
    y0 = np.array(sol.y[0], dtype=complex)
    y0b = y0.copy()
    y0b[1] += delta
    spec = traj.spec
    other = integrate(
        traj.seed,
        spec.t0,
        spec.t1,
        spec.waypoints,
        spec.rtol,
        spec.atol,
        state0=tuple(y0b),
    )
    if other.truncated:
        raise ArithmeticError("companion trajectory hit a singularity")
    s_pts = np.linspace(lo, hi, points)
    fam = 0.0
    flow = 0.0
    flagged = False
    ds = 1e-4
    for s in s_pts:
        a, b = sol(s), other.solution(s)
        du = b[0] - a[0]
        dS = b[2] - a[2]
        pred = (a[1] + b[1]) * du
        if abs(du) > 1e3 * abs(delta) * (1 + abs(a[0])):
            flagged = True
        fam = max(fam, abs(dS - pred) / max(abs(pred), 1e-300))
        t0 = complex(sol.t_at(s))
        yp, ym = sol(s + ds), sol(s - ds)
        dS_dt = (yp[2] - ym[2]) / (complex(sol.t_at(s + ds)) - complex(sol.t_at(s - ds)))
        lag = (a[1] ** 2 + (traj.m**2 * complex(wp(2 * a[0], _torus(t0), floor=0.0)) if traj.m else 0)) / TWO_PI_I
        flow = max(flow, abs(dS_dt - lag) / (1 + abs(lag)))
    return HJResult(max(fam, flow), fam, flow, flagged, complex(delta))


def _state_at(traj: CMTrajectory, tau: complex, s_ref: float):
    """Continue the dense state at arc length ``s_ref`` straight to ``tau``."""
    t_ref = complex(traj.solution.t_at(s_ref))
    y_ref = traj.solution(s_ref)
    if abs(tau - t_ref) == 0:
        return y_ref
    sol = integrate_ode(
        lambda t, y: eom_rhs(t, y, traj.m),
        OdeSpec(t_ref, tau, y_ref, rtol=traj.spec.rtol, atol=traj.spec.atol),
    )
    return sol.y[-1]


def locate_zero(traj: CMTrajectory, event: ZeroEvent, tol: float = 1e-4, max_iter: int = 40):
    """Newton iteration for ``g(tau) = (u - u*)^2 = 0`` in the complex plane.

    ``u*`` is the half-period nearest to ``u`` at the event; it must be of the
    form ``k/2`` (a fixed point of the lattice independent of ``tau``).
    The step is ``-g/g' = -pi i (u - u*)/v``.  Iteration stops once the
    step is below ``tol``: by quadratic convergence the returned point is
    then accurate to roughly ``tol**2``, and evaluating the flow any closer
    to the branch point would only stiffen the continuation.  A continuation
    that still stalls at the branch point ends the iteration there.
    """
    u_star = round(2 * event.u.real) / 2 if abs(event.u - round(2 * event.u.real) / 2) < 0.25 else None
    if u_star is None:
        raise ArithmeticError("nearest half period moves with tau; zero fit unsupported")
    tau = event.tau
    for _ in range(max_iter):
        try:
            y = _state_at(traj, tau, event.s)
        except OdeError as exc:
            if abs(complex(exc.t) - tau) < 1e-6:
                return tau, u_star
            raise
        step = complex(-math.pi * 1j * (y[0] - u_star) / y[1])
        tau = tau + step
        if abs(step) < tol:
            return tau, u_star
    raise ArithmeticError("Newton iteration for the zero did not converge")


@dataclass(frozen=True)
class ZeroFit:
    """Local expansion at a zero of ``u``.

    ``H_star_fit`` is ``+-(c2/c1)(4 pi i m)`` with the sign tied to the
    branch of ``c1``; ``H_star_direct`` is ``H`` at ``tau*`` from the Cauchy
    coefficients of ``H`` on the circle; ``H_star_shifted`` adds
    ``2 m^2 eta_1`` to the fitted value.
    """

    tau_star: complex
    u_star: float
    c1: complex
    c2: complex
    branch: str
    c1_modulus_error: float
    H_star_fit: complex
    H_star_direct: complex
    H_star_shifted: complex
    fit_residual: float
    flagged: bool
    matched_normalization: str


def zero_expansion_fit(
    traj: CMTrajectory,
    event: ZeroEvent | None = None,
    radius: float = 0.01,
    points: int = 64,
    threshold: float = 1e-6,
) -> ZeroFit:
    """Fit ``u = c1 s^{1/2}(1 + (c2/c1) s)`` at the zero nearest ``event``.

    ``(u - u*)^2`` and ``H`` are sampled on a circle of ``radius`` around the
    Newton estimate of ``tau*`` by continuing the ODE along the inscribed
    polygon; their Taylor coefficients follow from the discrete Fourier
    transform and are recentred on the refined zero.
    """
    if event is None:
        cands = [e for e in traj.events if e.kind == "approach"]
        if not cands:
            raise ArithmeticError("trajectory has no recorded approach to a zero")
        event = min(cands, key=lambda e: e.distance)
    m = traj.m
    tau_c, u_star = locate_zero(traj, event)
    verts = tau_c + radius * np.exp(2j * np.pi * np.arange(points + 1) / points)
    y_start = _state_at(traj, complex(verts[0]), event.s)
    sol = integrate_ode(
        lambda t, y: eom_rhs(t, y, m),
        OdeSpec(
            complex(verts[0]),
            complex(verts[-1]),
            y_start,
            rtol=traj.spec.rtol,
            atol=traj.spec.atol,
            waypoints=tuple(complex(v) for v in verts[1:-1]),
        ),
    )
    # Vertex states: accepted points that coincide with polygon vertices.
    vt = np.asarray(verts[:-1])
    idx = [int(np.argmin(np.abs(sol.t - t))) for t in vt]
    U = sol.y[idx, 0] - u_star
    V = sol.y[idx, 1]
    g = U * U
    Hs = np.array([hamiltonian(t, u + u_star, v, m) for t, u, v in zip(vt, U, V)])
    k = np.arange(points)
    G = np.fft.fft(g) / points / radius**k
    HH = np.fft.fft(Hs) / points / radius**k
    # Refine the zero: g(tau_c + e) = 0 by Newton on the Taylor polynomial.
    deg = 8
    poly_g = G[:deg][::-1]
    e = -G[0] / G[1]
    for _ in range(20):
        e = e - np.polyval(poly_g, e) / np.polyval(np.polyder(poly_g), e)
    # Recentre: coefficients of g and H around tau_c + e.
    d1 = np.polyder(poly_g)
    d2 = np.polyder(d1)
    g1 = complex(np.polyval(d1, e))
    g2 = complex(np.polyval(d2, e)) / 2
    H_direct = complex(np.polyval(HH[:deg][::-1], e))
    c1 = cmath.sqrt(g1)
    c2 = g2 / (2 * c1)
    # c1^2 = -i m/(2 pi) is the e^{-i pi/4} branch, for which H* = +(c2/c1) 4 pi i m.
    minus_branch = g1.imag < 0
    sign = 1.0 if minus_branch else -1.0
    H_fit = sign * (c2 / c1) * 4j * math.pi * m
    H_shift = H_fit + 2 * m * m * eta1(_torus(tau_c + e))
    mod_err = abs(abs(g1) * 2 * math.pi / m - 1) if m else math.inf
    # Fit quality: high Fourier coefficients should have decayed.
    tail = float(np.max(np.abs(G[points // 2 - 4 : points // 2 + 4] * radius ** k[points // 2 - 4 : points // 2 + 4])))
    fit_residual = tail / max(abs(g1) * radius, 1e-300)
    d_plain = abs(H_fit - H_direct)
    d_shift = abs(H_shift - H_direct)
    return ZeroFit(
        tau_star=complex(tau_c + e),
        u_star=u_star,
        c1=c1,
        c2=c2,
        branch="exp(-i pi/4)" if minus_branch else "exp(+i pi/4)",
        c1_modulus_error=mod_err,
        H_star_fit=complex(H_fit),
        H_star_direct=H_direct,
        H_star_shifted=complex(H_shift),
        fit_residual=fit_residual,
        flagged=bool(fit_residual > threshold),
        matched_normalization="H*" if d_plain <= d_shift else "H* + 2 m^2 eta_1",
    )


def accessory_hamiltonian_compare(params, seed: MonodromySeed, tau0, tau1, spec=None, **kw):
    """Report ``H(tau*)`` next to ``4 * accessory(q*)`` at ``q* = e^{i pi tau*}``.

    Exploratory: nothing is asserted about their agreement.
    """
    from .lame import accessory_report

    traj = integrate(seed, tau0, tau1, **kw)
    fit = zero_expansion_fit(traj)
    torus = Torus(fit.tau_star)
    rep = accessory_report(params, torus, spec)
    four_acc = 4 * rep.accessory
    return {
        "tau_star": fit.tau_star,
        "q_star": torus.q,
        "H_star": fit.H_star_direct,
        "H_star_fit": fit.H_star_fit,
        "four_accessory": four_acc,
        "difference": fit.H_star_direct - four_acc,
        "accessory_spread": rep.spread,
        "accessory_valid": rep.valid,
    }


def trajectory_csv(traj: CMTrajectory) -> str:
    """CSV export: header plus one row per sample, 17 significant digits."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for t, u, v, h in zip(traj.tau, traj.u, traj.v, traj.H):
        vals = (t.real, t.imag, u.real, u.imag, v.real, v.imag, h.real, h.imag)
        buf.write(",".join(f"{float(x):.17g}" for x in vals) + "\n")
    return buf.getvalue()
