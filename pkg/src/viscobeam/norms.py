"""Space-time error norms, convergence rates and reference solutions.

Errors are ``e0 = ||.||_{L1(0,T; L2)}`` and ``e1 = ||.||_{L1(0,T; H1)}`` (full
H1 norm).  The time integral uses the trapezoid rule over the sampled states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import sympy

from .assembly import LoadTerm, build_mixed
from .beam import CLAMPED, BeamConfig
from .fe import FeSpace, gauss_rule
from .material import PronyMaterial, creep_factor
from .mesh import Mesh1D, merged_breakpoints
from .stepper import SolutionHistory, solve_quasi_static

FIELDS = ("w", "theta", "gamma")


# ---------------------------------------------------------------- samplers


class FeSampler:
    """Batched evaluation of the sampled states of a history."""

    def __init__(self, history: SolutionHistory):
        self.history = history
        self.times = history.times
        self.spaces = history.ops.spaces()
        self.coeffs = history.coefficients()
        self.mesh = self.spaces["w"].mesh
        self.degree = self.spaces["w"].degree

    def values(self, fld: str, x: np.ndarray, deriv: int = 0) -> np.ndarray:
        """Array ``(len(x), n_samples)``."""
        E = self.spaces[fld].eval_matrix(x, deriv)
        return np.asarray(E @ np.asarray(self.coeffs[fld], dtype=float).T)


class AnalyticSampler:
    """Separable closed-form fields ``profile(t) * shape(x)``."""

    def __init__(self, shapes: dict, profile: Callable, times: np.ndarray, degree: int = 6):
        self.shapes = shapes  # field -> (value, derivative) callables
        self.profile = profile
        self.times = np.asarray(times, dtype=float)
        self.mesh = None
        self.degree = degree

    def values(self, fld: str, x: np.ndarray, deriv: int = 0) -> np.ndarray:
        f = self.shapes[fld][deriv]
        fx = np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x))
        return np.outer(fx, np.asarray(self.profile(self.times), dtype=float))


# ---------------------------------------------------------------- norms


def spatial_norms(u, v, kind: str = "L2", mesh_u: Mesh1D | None = None, mesh_v: Mesh1D | None = None,
                  n_points: int = 6) -> float:
    """Norm of ``u - v`` on the finer of two nested meshes.

    ``u`` and ``v`` are callables (finite element functions need a
    ``derivative`` method for ``kind="H1"``).  ``kind`` is ``"L2"``,
    ``"H1semi"`` or ``"H1"`` (full).
    """
    if kind not in ("L2", "H1semi", "H1"):
        raise ValueError(f"unknown norm {kind!r}")
    meshes = [m for m in (mesh_u, mesh_v) if m is not None]
    if not meshes:
        raise ValueError("at least one mesh is needed")
    if len(meshes) == 2:
        coarse, fine = sorted(meshes, key=lambda m: m.n_elements)
        if not coarse.is_nested_in(fine):
            raise ValueError("meshes are not nested")
        mesh = fine
    else:
        mesh = meshes[0]
    x, w = _points_on(mesh.nodes, gauss_rule(n_points))
    total = 0.0
    if kind in ("L2", "H1"):
        total += float(w @ (np.asarray(u(x)) - np.asarray(v(x))) ** 2)
    if kind in ("H1semi", "H1"):
        total += float(w @ (np.asarray(u.derivative(x)) - np.asarray(v.derivative(x))) ** 2)
    return math.sqrt(total)


def _points_on(breaks: np.ndarray, rule) -> tuple[np.ndarray, np.ndarray]:
    a, b = breaks[:-1, None], breaks[1:, None]
    x = a + 0.5 * (rule.points[None, :] + 1.0) * (b - a)
    w = 0.5 * (b - a) * rule.weights[None, :]
    return x.ravel(), w.ravel()


def time_accumulate(values, dt=None, times=None) -> float:
    """Trapezoid rule of a sampled scalar series (uniform ``dt`` or explicit ``times``)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    if times is not None:
        return float(np.trapezoid(values, np.asarray(times, dtype=float)))
    return float(np.trapezoid(values, dx=float(dt)))


def convergence_rate(e: float, e_prev: float, h: float, h_prev: float) -> float:
    """``log(e / e_prev) / log(h / h_prev)``; NaN when undefined."""
    if not (e > 0.0 and e_prev > 0.0 and h > 0.0 and h_prev > 0.0) or h == h_prev:
        return float("nan")
    return math.log(e / e_prev) / math.log(h / h_prev)


def format_rate(r: float) -> str:
    """Two decimals truncated toward zero, as in published rate columns; empty when undefined."""
    if not np.isfinite(r):
        return ""
    v = math.floor(abs(r) * 100.0 + 1e-9) / 100.0
    return f"{math.copysign(v, r):.2f}" if v else "0.00"


class ErrorEvaluator:
    """Per-sample spatial errors between a history and a reference.

    With two finite element meshes the quadrature runs on the union of their
    breakpoints, so every integrand is a polynomial on each sub-interval.
    """

    def __init__(self, approx: FeSampler, reference, require_nested: bool = False):
        if approx.times.shape != reference.times.shape or not np.allclose(
            approx.times, reference.times, rtol=0, atol=1e-9 * max(1.0, float(approx.times.max(initial=1.0)))
        ):
            raise ValueError("history and reference are sampled at different times")
        if reference.mesh is not None:
            if require_nested and not approx.mesh.is_nested_in(reference.mesh):
                raise ValueError("meshes are not nested")
            breaks = merged_breakpoints(approx.mesh, reference.mesh)
        else:
            breaks = approx.mesh.nodes
        n_pts = max(approx.degree, reference.degree) + 2
        self.x, self.w = _points_on(breaks, gauss_rule(min(10, n_pts)))
        self.approx, self.reference = approx, reference

    def per_sample(self) -> dict:
        """``{(field, 'L2'|'H1'): array over samples}``."""
        out = {}
        for fld in FIELDS:
            d0 = self.approx.values(fld, self.x) - self.reference.values(fld, self.x)
            l2 = self.w @ d0**2
            out[(fld, "L2")] = np.sqrt(l2)
            if fld != "gamma":
                d1 = self.approx.values(fld, self.x, 1) - self.reference.values(fld, self.x, 1)
                out[(fld, "H1")] = np.sqrt(l2 + self.w @ d1**2)
        return out

    def errors(self) -> dict:
        """``{(field, 'e0'|'e1'): L1-in-time error}``."""
        t = self.approx.times
        res = {}
        for (fld, kind), series in self.per_sample().items():
            res[(fld, "e0" if kind == "L2" else "e1")] = time_accumulate(series, times=t)
        return res


@dataclass
class ErrorReport:
    """Errors of one discretisation and rates against its predecessor."""

    h: float
    dofs: int
    errors: dict
    rates: dict = field(default_factory=dict)
    label: str = ""

    def with_rates(self, prev: "ErrorReport | None") -> "ErrorReport":
        if prev is not None:
            self.rates = {
                k: convergence_rate(v, prev.errors.get(k, float("nan")), self.h, prev.h)
                for k, v in self.errors.items()
            }
        return self


def error_report(history: SolutionHistory, reference, prev: ErrorReport | None = None, label: str = "") -> ErrorReport:
    ev = ErrorEvaluator(FeSampler(history), reference)
    mesh = history.ops.spaces()["w"].mesh
    L = history.ops.layout
    dofs = L.Vw.n_dofs + L.Vtheta.n_dofs
    return ErrorReport(mesh.h_max, dofs, ev.errors(), label=label).with_rates(prev)


# ---------------------------------------------------------------- references


def elastic_fields(cfg: BeamConfig) -> dict:
    """Closed-form elastic solution under the uniform load ``q_E``.

    Returns ``field -> (value, derivative)`` callables in the rescaled
    variables.
    """
    q, L, Ih, Ah, lam = cfg.load_scale, cfg.L, cfg.I_hat, cfg.A_hat, cfg.lam
    c = L / 2.0

    def s(x):
        return np.asarray(x, dtype=float) - c

    if cfg.bc == CLAMPED:
        th = lambda x: q / Ih * (s(x) ** 3 / 6 - L**2 * s(x) / 24)
        dth = lambda x: q / Ih * (s(x) ** 2 / 2 - L**2 / 24)
        w = lambda x: q / Ih * (s(x) ** 4 / 24 - L**2 * s(x) ** 2 / 48 + L**4 / 384) + lam * q / (2 * Ah) * (L**2 / 4 - s(x) ** 2)
        dw = lambda x: q / Ih * (s(x) ** 3 / 6 - L**2 * s(x) / 24) - lam * q / Ah * s(x)
    else:
        th = lambda x: q / Ih * (s(x) ** 3 / 6 - L**2 * s(x) / 8)
        dth = lambda x: q / Ih * (s(x) ** 2 / 2 - L**2 / 8)
        w = lambda x: q / Ih * (s(x) ** 4 / 24 - L**2 * s(x) ** 2 / 16 + 5 * L**4 / 384) + lam * q / (2 * Ah) * (L**2 / 4 - s(x) ** 2)
        dw = lambda x: q / Ih * (s(x) ** 3 / 6 - L**2 * s(x) / 8) - lam * q / Ah * s(x)
    g = lambda x: q * s(x)
    dg = lambda x: np.full_like(s(x), q)
    return {"w": (w, dw), "theta": (th, dth), "gamma": (g, dg)}


def elastic_midspan_deflection(cfg: BeamConfig) -> float:
    """Midspan deflection of the elastic beam in the rescaled variables."""
    return float(elastic_fields(cfg)["w"][0](cfg.L / 2.0))


def physical_midspan_deflection(cfg: BeamConfig, q_tilde: float) -> float:
    """Classical ``q L^4 / (384 E I) + q L^2 / (8 ks G A)`` (clamped) or the SS analogue."""
    E0 = cfg.material.E0
    G = E0 / (2.0 * (1.0 + cfg.material.nu))
    bend = (1.0 if cfg.bc == CLAMPED else 5.0) * q_tilde * cfg.L**4 / (384.0 * E0 * cfg.I)
    return bend + q_tilde * cfg.L**2 / (8.0 * cfg.ks * G * cfg.A)


@dataclass(frozen=True)
class ExpSum:
    """Time profile ``sum_j c_j exp(-a_j t)``."""

    terms: tuple  # ((c, a), ...)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return sum(c * np.exp(-a * t) for c, a in self.terms) + 0.0 * t

    def convolve(self, material: PronyMaterial) -> Callable:
        """Closed form of ``int_0^t k(t - s) p(s) ds``."""
        ker = material.kernel_terms

        def conv(t):
            t = np.asarray(t, dtype=float)
            out = 0.0 * t
            for kappa, tau in ker:
                b = 1.0 / tau
                for c, a in self.terms:
                    if abs(b - a) < 1e-12 * max(b, abs(a)):
                        out = out + kappa * c * t * np.exp(-a * t)
                    else:
                        out = out + kappa * c * (np.exp(-a * t) - np.exp(-b * t)) / (b - a)
            return out

        return conv


@dataclass
class Manufactured:
    """Separable exact solution ``profile(t) * (W, Theta, Gamma)(x)``.

    ``Gamma = (A_hat / lam)(Theta - W')`` makes the constitutive equation
    exact; the load is the residual of the momentum equation.
    """

    cfg: BeamConfig
    W: object  # sympy expression in x
    Theta: object
    profile: ExpSum
    x: sympy.Symbol = field(default_factory=lambda: sympy.Symbol("x"))

    def __post_init__(self):
        if not isinstance(self.profile, ExpSum):
            raise ValueError("manufactured profiles must be exponential sums (closed-form convolution)")
        x, cfg = self.x, self.cfg
        W, Th = sympy.sympify(self.W), sympy.sympify(self.Theta)
        G = sympy.Rational(1) * cfg.A_hat / cfg.lam * (Th - sympy.diff(W, x))
        ends = {"w": [W.subs(x, 0), W.subs(x, cfg.L)]}
        if cfg.bc == CLAMPED:
            ends["theta"] = [Th.subs(x, 0), Th.subs(x, cfg.L)]
        scale = max(1.0, float(sympy.Abs(W.subs(x, cfg.L / 3))))
        for k, vals in ends.items():
            if any(abs(float(v)) > 1e-12 * scale for v in vals):
                raise ValueError(f"manufactured {k} violates the boundary conditions")

        def fn(expr):
            return sympy.lambdify(x, expr, "numpy")

        self.shapes = {
            "w": (fn(W), fn(sympy.diff(W, x))),
            "theta": (fn(Th), fn(sympy.diff(Th, x))),
            "gamma": (fn(G), fn(sympy.diff(G, x))),
        }
        self._bend = fn(cfg.I_hat * sympy.diff(Th, x))
        self._gamma = fn(G)

    def loads(self) -> list[LoadTerm]:
        conv = self.profile.convolve(self.cfg.material)
        p = self.profile
        temporal = lambda t: p(t) - conv(t)
        shape = lambda f: (lambda x: np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x)))
        g = shape(self._gamma)
        return [LoadTerm(
            temporal=temporal,
            w_slope=lambda x: -g(x),
            theta_value=g,
            theta_slope=shape(self._bend),
        )]

    def sampler(self, times) -> AnalyticSampler:
        return AnalyticSampler(self.shapes, self.profile, times)


def reference_solution(cfg: BeamConfig, strategy: str = "overkill", *, n_elements: int = 1120,
                       degree: int = 2, stride: int = 1, times=None, manufactured: Manufactured | None = None,
                       backend=None):
    """Reference for error measurement.

    * ``overkill``: mixed solve of degree ``degree`` on ``n_elements`` with the
      same time step (returns an :class:`FeSampler`);
    * ``elastic-analytic``: closed-form elastic fields times the exact creep
      factor of the material (the load profile must be a step);
    * ``manufactured``: the supplied :class:`Manufactured` solution.
    """
    if strategy == "overkill":
        hist = solve_quasi_static(build_mixed(cfg, n_elements, degree), stride=stride, backend=backend)
        return FeSampler(hist)
    if times is None:
        times = np.arange(0, cfg.n_steps + 1, stride) * cfg.dt
    if strategy == "elastic-analytic":
        if cfg.load.type not in ("heaviside", "constant"):
            raise ValueError("the analytic reference needs a step load")
        return AnalyticSampler(elastic_fields(cfg), lambda t: creep_factor(cfg.material, t), times)
    if strategy == "manufactured":
        if manufactured is None:
            raise ValueError("manufactured strategy needs a Manufactured solution")
        return manufactured.sampler(times)
    raise ValueError(f"unknown reference strategy {strategy!r}")
