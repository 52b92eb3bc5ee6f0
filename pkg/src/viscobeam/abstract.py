"""Finite-dimensional instances of the abstract mixed Volterra problem.

Forms are matrices with Euclidean Riesz maps, so dual norms are Euclidean
norms and the splittings ``v = v0 + v_bar`` are orthogonal projections onto
``ker B`` and ``ker B^T``.  The kernels are exponential,
``k_i(t, s) = amp_i exp(-rate_i (t - s))``, bounded by ``|amp_i|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import DenseLU, NumericalFailure, null_space, singular_values
from .stepper import trapezoid_weights


@dataclass(frozen=True)
class ExpKernel:
    amp: float = 0.0
    rate: float = 1.0

    def __call__(self, t, s):
        t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
        if np.any(s > t + 1e-12):
            raise ValueError("kernel is defined for s <= t")
        return self.amp * np.exp(-self.rate * (t - s))

    @property
    def bound(self) -> float:
        return abs(self.amp)


ZERO = ExpKernel(0.0, 1.0)


@dataclass(eq=False)
class AbstractSystem:
    """Matrices ``A`` (a), ``B`` (b), ``C`` (c) and kernels ``k1 .. k4``.

    ``lam`` is set for the parameter-dependent case ``C = lam I``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    kernels: tuple = (ZERO, ZERO, ZERO, ZERO)
    T: float = 1.0
    lam: float | None = None
    measured: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A, self.B, self.C = (np.asarray(M, dtype=float) for M in (self.A, self.B, self.C))
        nq, nv = self.B.shape
        if self.A.shape != (nv, nv) or self.C.shape != (nq, nq):
            raise ValueError("block shapes are inconsistent")
        if not (np.allclose(self.A, self.A.T) and np.allclose(self.C, self.C.T)):
            raise ValueError("A and C must be symmetric")
        if len(self.kernels) != 4:
            raise ValueError("four kernels are required")
        if not self.measured:
            self.measured = measure_constants(self.A, self.B, self.C)

    @property
    def n_V(self) -> int:
        return self.A.shape[0]

    @property
    def n_Q(self) -> int:
        return self.C.shape[0]

    @property
    def kernel_bounds(self) -> tuple:
        return tuple(k.bound for k in self.kernels)

    def kernel_bounds_ok(self, n: int = 50) -> bool:
        t = np.linspace(0.0, self.T, n)
        tt, ss = np.meshgrid(t, t, indexing="ij")
        mask = ss <= tt
        return all(np.all(np.abs(k(tt[mask], ss[mask])) <= k.bound * (1 + 1e-12)) for k in self.kernels)

    def with_lambda(self, lam: float) -> "AbstractSystem":
        """Parameter-dependent variant ``C = lam I`` with memory-free second equation."""
        k1, k2, _, _ = self.kernels
        C = lam * np.eye(self.n_Q)
        return AbstractSystem(self.A, self.B, C, (k1, k2, ZERO, ZERO), self.T, lam)


def _min_eig_on(M: np.ndarray, Z: np.ndarray) -> float:
    if Z.shape[1] == 0:
        return float("inf")
    return float(np.linalg.eigvalsh(Z.T @ M @ Z).min())


def measure_constants(A, B, C) -> dict:
    """Norms, ellipticity on the kernels and the inf-sup constant."""
    s = singular_values(B)
    tol = 1e-10 * (s.max() if s.size else 1.0)
    nz = s[s > tol]
    K = null_space(B)
    H = null_space(B.T)
    norm_a, norm_c = float(np.linalg.norm(A, 2)), float(np.linalg.norm(C, 2))
    # on a trivial kernel the ellipticity constant is vacuous; use the norm
    return {
        "norm_a": norm_a,
        "norm_b": float(s.max()) if s.size else 0.0,
        "norm_c": norm_c,
        "alpha0": _min_eig_on(A, K) if K.shape[1] else norm_a,
        "gamma0": _min_eig_on(C, H) if H.shape[1] else norm_c,
        "beta": float(nz.min()) if nz.size else 0.0,
        "rank_b": int(nz.size),
    }


def _orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _psd_with_kernel_floor(rng, Y, Z, floor, top, coupling):
    """Symmetric PSD ``M`` with ``min eig(Z^T M Z) = floor`` exactly."""
    nz, ny = Z.shape[1], Y.shape[1]
    if nz:
        ev = np.concatenate([[floor], rng.uniform(floor, max(floor, top), nz - 1)])
        Qz = _orthogonal(rng, nz)
        Mzz = (Qz * ev) @ Qz.T
    else:
        Mzz = np.zeros((0, 0))
    if ny:
        Myz = coupling * rng.standard_normal((ny, nz)) * math.sqrt(floor) if nz else np.zeros((ny, 0))
        G = rng.standard_normal((ny, ny))
        P = G @ G.T / ny * top
        Myy = P + (Myz @ np.linalg.solve(Mzz, Myz.T) if nz else 0.0)
    else:
        Myz, Myy = np.zeros((0, nz)), np.zeros((0, 0))
    Wm = np.hstack([Y, Z])
    Mb = np.block([[Myy, Myz], [Myz.T, Mzz]])
    M = Wm @ Mb @ Wm.T
    return 0.5 * (M + M.T)


def random_system(n_V: int, n_Q: int, *, alpha0: float = 0.5, beta: float = 0.5, gamma0: float = 0.5,
                  norm_b: float = 2.0, scale_a: float = 2.0, scale_c: float = 2.0, rank: int | None = None,
                  kernels=(ZERO, ZERO, ZERO, ZERO), T: float = 1.0, coupling: float = 0.5,
                  seed: int = 0) -> AbstractSystem:
    """Random system with prescribed ``alpha0``, ``beta``, ``gamma0`` and ``||b||``.

    ``rank`` below ``n_Q`` gives a closed but non-surjective ``B``.  ``scale_a``
    and ``scale_c`` set the spread of the remaining spectra; ``||a||`` and
    ``||c||`` are measured afterwards.
    """
    if not n_V >= n_Q >= 1:
        raise ValueError("need n_V >= n_Q >= 1")
    rank = n_Q if rank is None else int(rank)
    if not 1 <= rank <= n_Q:
        raise ValueError("rank must lie in [1, n_Q]")
    if min(alpha0, beta, gamma0, norm_b, scale_a, scale_c) <= 0.0:
        raise ValueError("spectral targets must be positive")
    if beta > norm_b:
        raise ValueError("beta cannot exceed ||b||")
    if rank == 1 and not math.isclose(beta, norm_b):
        raise ValueError("a rank-one B has beta == ||b||")
    if alpha0 > scale_a or gamma0 > scale_c:
        raise ValueError("ellipticity targets exceed the spectral scale")
    rng = np.random.default_rng(seed)
    U = _orthogonal(rng, n_Q)
    V = _orthogonal(rng, n_V)
    if rank == 1:
        sv = np.array([beta])
    else:
        sv = np.sort(np.concatenate([[beta, norm_b], rng.uniform(beta, norm_b, rank - 2)]))[::-1]
    B = (U[:, :rank] * sv) @ V[:, :rank].T
    A = _psd_with_kernel_floor(rng, V[:, :rank], V[:, rank:], alpha0, scale_a, coupling)
    C = _psd_with_kernel_floor(rng, U[:, :rank], U[:, rank:], gamma0, scale_c, coupling)
    return AbstractSystem(A, B, C, tuple(kernels), T)


# ---------------------------------------------------------------- solver


@dataclass
class Trajectory:
    times: np.ndarray
    u: np.ndarray  # (steps, n_V)
    p: np.ndarray  # (steps, n_Q)


def solve_volterra(sys: AbstractSystem, f, g, dt: float) -> Trajectory:
    """Trapezoidal march of the full block Volterra system.

    ``f`` and ``g`` are arrays ``(N + 1, n)`` sampled on ``t_j = j dt``.  The
    endpoint quadrature term multiplies the unknown and is kept on the left;
    the block matrix is refactorised whenever ``k_i(t_n, t_n)`` changes.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    g = np.atleast_2d(np.asarray(g, dtype=float))
    if f.shape[1] != sys.n_V or g.shape[1] != sys.n_Q or f.shape[0] != g.shape[0]:
        raise ValueError("data do not match the system")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    N = f.shape[0] - 1
    t = np.arange(N + 1) * dt
    A, B, C = sys.A, sys.B, sys.C
    nv, nq = sys.n_V, sys.n_Q
    k1, k2, k3, k4 = sys.kernels
    u = np.zeros((N + 1, nv))
    p = np.zeros((N + 1, nq))
    Au, Btp, Bu, Cp = (np.zeros((N + 1, m)) for m in (nv, nv, nq, nq))
    cache = {}
    for n in range(N + 1):
        w = trapezoid_weights(n, dt)
        diag = tuple(float(w[-1] * k(t[n], t[n])) for k in (k1, k2, k3, k4))
        if diag not in cache:
            d1, d2, d3, d4 = diag
            M = np.block([[(1 - d1) * A, (1 - d2) * B.T], [(1 - d3) * B, -(1 - d4) * C]])
            try:
                cache[diag] = DenseLU(M)
            except NumericalFailure as exc:
                raise NumericalFailure("singular block matrix", step=n) from exc
        rhs_u, rhs_p = f[n].copy(), g[n].copy()
        if n:
            wj = w[:-1]
            rhs_u += (wj * k1(t[n], t[:n])) @ Au[:n] + (wj * k2(t[n], t[:n])) @ Btp[:n]
            rhs_p += (wj * k3(t[n], t[:n])) @ Bu[:n] - (wj * k4(t[n], t[:n])) @ Cp[:n]
        y = cache[diag].solve(np.concatenate([rhs_u, rhs_p]))
        if not np.all(np.isfinite(y)):
            raise NumericalFailure("non-finite state", step=n)
        u[n], p[n] = y[:nv], y[nv:]
        Au[n], Btp[n], Bu[n], Cp[n] = A @ u[n], B.T @ p[n], B @ u[n], C @ p[n]
    return Trajectory(t, u, p)


def static_solve(sys: AbstractSystem, f, g) -> tuple[np.ndarray, np.ndarray]:
    """One-shot mixed solve (no memory)."""
    M = np.block([[sys.A, sys.B.T], [sys.B, -sys.C]])
    y = DenseLU(M).solve(np.concatenate([f, g]))
    return y[: sys.n_V], y[sys.n_V :]


# ---------------------------------------------------------------- constants


def _exp(x: float) -> float:
    # the constants grow like exp(exp(.)); report inf rather than raise
    return math.exp(x) if x < 709.0 else math.inf


def _params(sys_or_params) -> dict:
    if isinstance(sys_or_params, AbstractSystem):
        d = dict(sys_or_params.measured)
        d["Ck"] = sys_or_params.kernel_bounds
        d["T"] = sys_or_params.T
        d["lam"] = sys_or_params.lam
        return d
    return dict(sys_or_params)


def constants_mt1(params) -> dict:
    """Constants of the first stability theorem.

    ``params`` holds ``norm_a``, ``norm_c``, ``alpha0``, ``gamma0``, ``beta``,
    ``Ck = (Ck1, Ck2, Ck3, Ck4)`` and ``T`` (or is an :class:`AbstractSystem`).
    """
    P = _params(params)
    a, c, al, ga, be, T = P["norm_a"], P["norm_c"], P["alpha0"], P["gamma0"], P["beta"], P["T"]
    k1, k2, k3, k4 = P["Ck"]
    e, sq = _exp, math.sqrt
    mu = sq(c * a)
    C1 = a / be**2
    C2 = C1 * sq(c) / sq(ga) * (1 + k4 * T * (1 + e(k4 * T) * (1 + k4 * T)))
    C3 = (1 / be) * (1 + T * e(k3 * T)) * ((mu + be) / be + k4 * T * c * (C1 + C2))
    C4 = sq(a / al)
    Cp0 = 1 + T * k4 * sq(c) * e(k4 * sq(c) * T / sq(ga)) / sq(ga)
    chi_p = k4 * (1 + Cp0)
    C5 = (1 + T * chi_p * e(T * chi_p)) * (
        (1 / ga) * (sq(c) * a / be**2 + 1 / (2 * sq(c))) + T * k4 * e(k4 * sq(c) * T / sq(ga)) / (2 * ga)
    )
    C6 = Cp0 * (1 / ga + sq(c) / sq(ga) * (1 + T * k4) * C5)
    C7 = (1 + T * k3 * e(k3 * T)) / be * (sq(c) / sq(2) * (1 + C6) * (1 + k4 * T) + 1)
    C8 = C7 * sq(a / al)
    C9 = c / be**2
    C10 = C9 * sq(a) / sq(al) * (1 + k1 * T * (1 + e(k1 * T) * (1 + k1 * T)))
    C11 = (1 / be) * (1 + T * e(k2 * T)) * ((mu + be) / be + k1 * T * c * (C9 + C10))
    C12 = sq(c) / sq(ga)
    Cu0 = 1 + T * k1 * sq(a) * e(k1 * sq(a) * T / sq(al)) / sq(al)
    chi_u = k1 * (1 + Cu0)
    C13 = (1 + T * chi_u * e(T * chi_u)) * (
        (1 / al) * (sq(a) * c / be**2 + 1 / (2 * sq(a))) + T * k1 * e(k1 * sq(a) * T / sq(al)) / (2 * al)
    )
    C14 = Cu0 * (1 / al + sq(a) / sq(al) * (1 + T * k1) * C13)
    C15 = (1 + T * k2 * e(k2 * T)) / be * (sq(a) / sq(2) * (1 + C14) * (1 + k1 * T) + 1)
    C16 = C15 * sq(c) / sq(ga)
    out = {f"C{i}": v for i, v in enumerate(
        [C1, C2, C3, C4, C5, C6, C7, C8, C9, C10, C11, C12, C13, C14, C15, C16], start=1)}
    out.update(mu=mu, chi_p=chi_p, chi_u=chi_u, Cp0=Cp0, Cu0=Cu0, C4_strict=C3 * sq(a / al))
    return out


def constants_mt1_reference(params) -> dict:
    """Independent re-typing of :func:`constants_mt1` (duplicate-evaluation oracle)."""
    P = _params(params)
    na, nc, a0, g0, b, T = (P[k] for k in ("norm_a", "norm_c", "alpha0", "gamma0", "beta", "T"))
    K1, K2, K3, K4 = P["Ck"]
    r = {}
    r["C1"] = na / (b * b)
    r["C2"] = r["C1"] * (nc / g0) ** 0.5 * (1.0 + K4 * T + K4 * T * np.exp(K4 * T) * (1.0 + K4 * T))
    mu = (nc * na) ** 0.5
    r["C3"] = (1.0 + T * np.exp(K3 * T)) * ((mu + b) / b + K4 * T * nc * (r["C1"] + r["C2"])) / b
    r["C4"] = (na / a0) ** 0.5
    growth_c = np.exp(K4 * T * (nc / g0) ** 0.5)
    cp0 = 1.0 + T * K4 * (nc / g0) ** 0.5 * growth_c
    chi = K4 + K4 * cp0
    r["C5"] = (1.0 + T * chi * np.exp(T * chi)) * (
        (nc**0.5 * na / b**2 + 0.5 / nc**0.5) / g0 + 0.5 * T * K4 * growth_c / g0)
    r["C6"] = cp0 * (1.0 / g0 + (nc / g0) ** 0.5 * (1.0 + T * K4) * r["C5"])
    r["C7"] = (1.0 + T * K3 * np.exp(K3 * T)) * (nc**0.5 * (1.0 + r["C6"]) * (1.0 + K4 * T) / 2**0.5 + 1.0) / b
    r["C8"] = r["C7"] * (na / a0) ** 0.5
    r["C9"] = nc / (b * b)
    r["C10"] = r["C9"] * (na / a0) ** 0.5 * (1.0 + K1 * T + K1 * T * np.exp(K1 * T) * (1.0 + K1 * T))
    r["C11"] = (1.0 + T * np.exp(K2 * T)) * ((mu + b) / b + K1 * T * nc * (r["C9"] + r["C10"])) / b
    r["C12"] = (nc / g0) ** 0.5
    growth_a = np.exp(K1 * T * (na / a0) ** 0.5)
    cu0 = 1.0 + T * K1 * (na / a0) ** 0.5 * growth_a
    chi = K1 + K1 * cu0
    r["C13"] = (1.0 + T * chi * np.exp(T * chi)) * (
        (na**0.5 * nc / b**2 + 0.5 / na**0.5) / a0 + 0.5 * T * K1 * growth_a / a0)
    r["C14"] = cu0 * (1.0 / a0 + (na / a0) ** 0.5 * (1.0 + T * K1) * r["C13"])
    r["C15"] = (1.0 + T * K2 * np.exp(K2 * T)) * (na**0.5 * (1.0 + r["C14"]) * (1.0 + K1 * T) / 2**0.5 + 1.0) / b
    r["C16"] = r["C15"] * (nc / g0) ** 0.5
    return {k: float(v) for k, v in r.items()}


def constants_mt2(params, lam: float | None = None) -> dict:
    """Constants of the second (parameter-dependent) stability theorem."""
    P = _params(params)
    lam = P.get("lam") if lam is None else lam
    if lam is None or not lam > 0.0:
        raise ValueError("lam must be positive")
    a, al, be, T = P["norm_a"], P["alpha0"], P["beta"], P["T"]
    k1, k2 = P["Ck"][0], P["Ck"][1]
    Ck = max(k1, k2)
    e, sq = _exp, math.sqrt
    grow = 1 + T * k1 * sq(a) / sq(al) * e(T * k1 * sq(a) / sq(al))
    M1 = grow / al
    M2 = sq(a) / (be * sq(al)) * grow * (1 + T * k1)
    N = 2 * lam * k1 * M2 * a / be + 2 * lam * k1 * a / be**2 + k2
    bracket = (1 + sq(a) / sq(al)) + 2 * T * Ck * M1 * a
    Cu1 = lam / be**2 * bracket * (1 + T * N * e(T * N))
    Cu2 = M1 + be * M2 * Cu1
    C1 = Cu1 + Cu2
    C3 = bracket / be * (1 + T * N * e(T * N))
    C2 = (be**2 + 4 * lam * a) / (al * be**2)
    C4 = 4 * a / (a * lam + 2 * be**2)
    # energy estimate for the g-part; carries the 1/beta the printed C2 lacks
    C2_derived = (1 + a / al) * (be**2 + lam * a) / be**3
    return dict(C1=C1, C2=C2, C3=C3, C4=C4, M1=M1, M2=M2, N=N, Cu1=Cu1, Cu2=Cu2, lam=lam,
                C2_derived=C2_derived)


# ---------------------------------------------------------------- verification


def l1_norm(x: np.ndarray, times: np.ndarray) -> float:
    """``int ||x(t)|| dt`` by the trapezoid rule."""
    return float(np.trapezoid(np.linalg.norm(np.atleast_2d(x), axis=1), times))


def split(sys: AbstractSystem) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projectors onto ``ker B`` and ``ker B^T``."""
    K = null_space(sys.B)
    H = null_space(sys.B.T)
    return K @ K.T, H @ H.T


@dataclass
class BoundReport:
    holds: bool
    slack: float
    checks: dict  # name -> (lhs, rhs)


def _report(checks: dict, rtol: float = 0.0) -> BoundReport:
    # checks with vanishing data and solution are trivially exact and carry no slack information
    live = [(lhs, rhs) for lhs, rhs in checks.values() if rhs > 0.0 or lhs > 0.0]
    slacks = [(rhs - lhs) / rhs if 0 < rhs < np.inf else (1.0 if rhs == np.inf else -np.inf) for lhs, rhs in live]
    holds = all(lhs <= rhs * (1.0 + rtol) for lhs, rhs in checks.values())
    return BoundReport(holds, float(min(slacks)) if slacks else float("inf"), checks)


def verify_bound(sys: AbstractSystem, traj: Trajectory, data: tuple, constants: dict, which: str = "mt1",
                 strict_c4: bool = False, derived_c2: bool = False, rtol: float = 1e-6) -> BoundReport:
    """Evaluate the stability inequalities on a computed trajectory.

    Parameters
    ----------
    data
        ``(f, g)`` as passed to :func:`solve_volterra`.
    which
        ``"mt1"``, ``"mt2"`` or ``"cor210"``.
    strict_c4, derived_c2
        Swap in ``C4_strict`` (first theorem) or ``C2_derived`` (second).
    rtol
        Floating-point allowance in ``holds``; the ``p_0`` estimate of the
        corollary is an identity and is met only up to roundoff.  ``slack``
        is reported without it.
    """
    f, g = (np.atleast_2d(np.asarray(x, dtype=float)) for x in data)
    if traj.u.shape != f.shape or traj.p.shape != g.shape:
        raise ValueError("trajectory does not match the data")
    t = traj.times
    PK, PH = split(sys)
    u0, p0, f0, g0 = traj.u @ PK, traj.p @ PH, f @ PK, g @ PH
    ub, pb, fb, gb = traj.u - u0, traj.p - p0, f - f0, g - g0
    n = {k: l1_norm(v, t) for k, v in dict(u0=u0, ub=ub, p0=p0, pb=pb, f0=f0, fb=fb, g0=g0, gb=gb,
                                             u=traj.u, p=traj.p, f=f, g=g).items()}
    C = {k: v for k, v in constants.items()}

    def lin(*pairs):
        # zero data contribute nothing even when a constant overflows
        return float(sum(c * x for c, x in pairs if x > 0.0))

    if which == "mt1":
        c4 = C["C4_strict"] if strict_c4 else C["C4"]
        checks = {
            "u_bar": (n["ub"], lin((C["C9"], n["fb"]), (C["C13"], n["f0"]), (C["C3"], n["gb"]), (C["C7"], n["g0"]))),
            "u_0": (n["u0"], lin((C["C10"], n["fb"]), (C["C14"], n["f0"]), (c4, n["gb"]), (C["C8"], n["g0"]))),
            "p_bar": (n["pb"], lin((C["C11"], n["fb"]), (C["C15"], n["f0"]), (C["C1"], n["gb"]), (C["C5"], n["g0"]))),
            "p_0": (n["p0"], lin((C["C12"], n["fb"]), (C["C16"], n["f0"]), (C["C2"], n["gb"]), (C["C6"], n["g0"]))),
        }
    elif which == "mt2":
        checks = {
            "u": (n["u"], lin((C["C1"], n["f"]), (C["C2_derived"] if derived_c2 else C["C2"], n["g"]))),
            "p": (n["p"], lin((C["C3"], n["f"]), (C["C4"], n["g"]))),
        }
    elif which == "cor210":
        lam = C["lam"]
        checks = {
            "u+p_bar": (n["u"] + n["pb"], lin((C["C1"] + C["C3"], n["f"]),
                                               ((C["C2_derived"] if derived_c2 else C["C2"]) + C["C4"], n["g"]))),
            "p_0": (n["p0"], lin((1.0 / lam, n["g0"]))),
        }
    else:
        raise ValueError(f"unknown bound {which!r}")
    return _report(checks, rtol)


def random_data(sys: AbstractSystem, dt: float, seed: int = 0, modes: int = 3,
                f_scale: float = 1.0, g_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Smooth random forcing ``sum_j a_j cos(w_j t + phi_j)`` sampled on the grid."""
    rng = np.random.default_rng(seed)
    N = int(round(sys.T / dt))
    t = np.arange(N + 1)[:, None] * dt

    def make(n, scale):
        out = np.zeros((N + 1, n))
        for _ in range(modes):
            amp = rng.standard_normal(n)
            om = rng.uniform(0.0, 2.0 * math.pi / max(sys.T, 1e-12))
            out += amp * np.cos(om * t + rng.uniform(0, 2 * math.pi))
        return scale * out / modes

    return make(sys.n_V, f_scale), make(sys.n_Q, g_scale)
