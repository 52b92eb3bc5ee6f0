"""Trapezoidal time march of the semi-discrete Volterra beam problem.

Each step solves ``K y_n = F g(t_n) + M sum_{j<=n} w_j k(t_n - t_j) y_j`` where
``M`` holds the memory-bearing rows.  The endpoint term ``j = n`` is moved to
the left-hand side, so for a convolution kernel one factorisation serves every
step after the elastic solve at ``t = 0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._kernels import get_kernel
from .beam import BeamConfig
from .linalg import BandedLU, NumericalFailure, coordinate_permutation
from .material import PronyMaterial

CHUNK = 512


def trapezoid_weights(n: int, dt: float) -> np.ndarray:
    """Composite trapezoid weights ``w_0 .. w_n`` on ``[0, n dt]``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return np.zeros(1)
    w = np.full(n + 1, float(dt))
    w[0] = w[-1] = 0.5 * dt
    return w


@dataclass(eq=False)
class SolutionHistory:
    """Sampled states of a march; row ``i`` of ``states`` is the state at ``times[i]``."""

    ops: object
    times: np.ndarray
    states: np.ndarray
    cfg: BeamConfig
    stride: int = 1
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.size

    def fields(self, i: int) -> dict:
        """``{'w', 'theta', 'gamma'}`` finite element functions at sample ``i``."""
        return self.ops.functions(self.states[i])

    def coefficients(self) -> dict:
        """Batched coefficient arrays of every field, shape ``(samples, n_dofs)``."""
        return self.ops.split(self.states)

    def midspan_deflection(self) -> np.ndarray:
        Vw = self.ops.spaces()["w"]
        E = Vw.eval_matrix([0.5 * self.cfg.L])
        return np.asarray(E @ self.coefficients()["w"].T).ravel()

    def to_csv(self, path, n_points: int = 41, every: int = 1) -> None:
        """Write ``t, x, w, theta, gamma`` on a uniform grid of ``n_points`` abscissae."""
        x = np.linspace(0.0, self.cfg.L, n_points)
        spaces = self.ops.spaces()
        coeffs = self.coefficients()
        vals = {k: coeffs[k] @ spaces[k].eval_matrix(x).T.toarray() for k in ("w", "theta", "gamma")}
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "x", "w", "theta", "gamma"])
            for i in range(0, len(self), every):
                for j, xj in enumerate(x):
                    wr.writerow(
                        [f"{self.times[i]:.10g}", f"{xj:.10g}"]
                        + [f"{vals[k][i, j]:.12e}" for k in ("w", "theta", "gamma")]
                    )


class VolterraMarcher:
    """Incremental solver: call :meth:`advance` repeatedly to march in chunks.

    ``memory="fast"`` uses the exponential recursion (one accumulator per
    kernel term, O(N) work); ``memory="direct"`` re-sums the stored history at
    every step (O(N^2)), the reference semantics.
    """

    def __init__(self, ops, material: PronyMaterial, dt: float, memory: str = "fast",
                 backend: str | None = None, refine: int | None = None):
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        if memory not in ("fast", "direct"):
            raise ValueError(f"unknown memory mode {memory!r}")
        self.ops, self.dt, self.memory = ops, float(dt), memory
        self.terms = material.kernel_terms
        self.kappa = np.array([k for k, _ in self.terms], dtype=float)
        self.taus = np.array([t for _, t in self.terms], dtype=float)
        self.rho = np.exp(-self.dt / self.taus) if self.terms else np.zeros(0)
        self.kernel = get_kernel(backend)
        # penalty (primal) systems get extended-precision residual correction
        accurate = hasattr(ops, "apply_accurate")
        self.refine = (3 if accurate else 0) if refine is None else int(refine)
        if self.refine and not accurate:
            raise ValueError("refinement needs operators with an extended-precision product")

        K = ops.saddle().tocsr()
        Mmem = ops.memory().tocsr()
        coords, ids = ops.coords()
        perm = coordinate_permutation(coords, ids)
        self.perm = perm
        self.iperm = np.empty_like(perm)
        self.iperm[perm] = np.arange(perm.size)
        self.K = K
        self.Mmem = Mmem
        self.lu0 = BandedLU(K, perm)
        k0 = float(self.kappa.sum())
        factor = 1.0 - 0.5 * self.dt * k0
        if factor <= 0.0:
            raise NumericalFailure("endpoint factor 1 - dt/2 k(t,t) is not positive", step=1)
        self.lhs = (K - (0.5 * self.dt * k0) * Mmem).tocsr()
        self.lu = BandedLU(self.lhs, perm) if k0 != 0.0 else self.lu0
        Mp = Mmem[perm][:, perm].tocsr()
        Mp.sort_indices()
        self._m = (Mp.data.astype(float), Mp.indices.astype(np.int32), Mp.indptr.astype(np.int32))
        F, g = ops.load_matrix()
        self.F = F[perm]
        self.g = g
        n = K.shape[0]
        self.n = n
        self.S = np.zeros((self.kappa.size, n))
        self.y = np.zeros(n)
        self.step = -1  # index of the last completed step
        self._stored: list[np.ndarray] = []

    def _loads(self, steps: np.ndarray) -> np.ndarray:
        t = steps * self.dt
        if not self.g:
            return np.zeros((steps.size, self.n))
        G = np.column_stack([np.broadcast_to(np.asarray(gk(t), dtype=float), t.shape) for gk in self.g])
        return np.ascontiguousarray(G @ self.F.T)

    def _check(self, y, step):
        if not np.all(np.isfinite(y)):
            raise NumericalFailure("non-finite state", step=step)

    def advance(self, count: int, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """March ``count`` further steps.

        Returns the step indices that are multiples of ``stride`` and the
        corresponding states in the natural (unpermuted) ordering.
        """
        if count < 0 or stride < 1:
            raise ValueError("count must be >= 0 and stride >= 1")
        idx_out, rows = [], []
        if self.refine:
            for n in range(self.step + 1, self.step + 1 + count):
                self._refined_step(n)
                if n % stride == 0:
                    idx_out.append(n)
                    rows.append(self.y_ld[self.perm])
            states = np.array(rows, dtype=np.longdouble).reshape(-1, self.n)
            return np.array(idx_out, dtype=np.int64), states[:, self.iperm]
        if count and self.step < 0:
            y0 = self.lu0.solve_permuted(self._loads(np.array([0]))[0])
            self._check(y0, 0)
            self._after_step(y0, 0)
            idx_out.append(0)
            rows.append(y0)
            count -= 1
        while count > 0:
            c = min(count, CHUNK)
            n0 = self.step + 1
            steps = np.arange(n0, n0 + c)
            loads = self._loads(steps)
            if self.memory == "fast":
                out = np.zeros(((c + stride - 1) // stride + 1, self.n))
                written = self.kernel(
                    self.lu.ab, self.lu.kl, self.lu.ku, self.lu.piv_fortran, *self._m,
                    loads, self.S, self.rho, self.kappa, self.y, self.dt, n0, stride, out,
                )
                if written < 0:
                    raise NumericalFailure("banded solve failed", step=n0 - 1 - written)
                self._check(self.y, n0 + c - 1)
                rows.extend(out[:written])
                self.step += c
            else:
                for k, n in enumerate(steps):
                    self._direct_step(n, loads[k])
                    if n % stride == 0:
                        rows.append(self.y.copy())
            idx_out.extend(s for s in steps if s % stride == 0)
            count -= c
        states = np.array(rows).reshape(-1, self.n)
        return np.array(idx_out, dtype=np.int64), states[:, self.iperm] if states.size else states

    def _after_step(self, y, n):
        self.y = np.array(y, dtype=float)
        self.step = n
        if self.memory == "fast":
            w = 0.5 * self.dt if n == 0 else self.dt
            self.S = self.rho[:, None] * (self.S + w * self.y[None, :])
        else:
            self._stored.append(self.y.copy())

    def _direct_step(self, n: int, load: np.ndarray) -> None:
        hist = np.zeros(self.n)
        if self.terms:
            w = trapezoid_weights(n, self.dt)[:-1]
            lag = (n - np.arange(n)) * self.dt
            k = (self.kappa[None, :] * np.exp(-lag[:, None] / self.taus[None, :])).sum(axis=1)
            hist = (w * k) @ np.array(self._stored)
        rhs = load + self._mp_matvec(hist)
        y = self.lu.solve_permuted(rhs)
        self._check(y, n)
        self._after_step(y, n)

    def _refined_step(self, n: int) -> None:
        ops = self.ops
        load = self._loads(np.array([n]))[0][self.iperm].astype(np.longdouble)
        if n == 0:
            self.S_ld = np.zeros((self.kappa.size, self.n), dtype=np.longdouble)
            rhs, c, lu = load, np.longdouble(1.0), self.lu0
        else:
            hist = self.kappa.astype(np.longdouble) @ self.S_ld
            rhs = load + ops.apply_accurate(hist)
            c = 1.0 - 0.5 * np.longdouble(self.dt) * self.kappa.astype(np.longdouble).sum()
            lu = self.lu
        y = lu.solve(np.asarray(rhs, dtype=float)).astype(np.longdouble)
        for _ in range(self.refine):
            r = rhs - c * ops.apply_accurate(y)
            y = y + lu.solve(np.asarray(r, dtype=float))
        self._check(np.asarray(y, dtype=float), n)
        self.y_ld = y
        w = np.longdouble(0.5 * self.dt if n == 0 else self.dt)
        self.S_ld = np.exp(-np.longdouble(self.dt) / self.taus.astype(np.longdouble))[:, None] * (
            self.S_ld + w * y[None, :]
        )
        self.y = np.asarray(y, dtype=float)[self.perm]
        self.step = n

    def _mp_matvec(self, v):
        data, ind, ptr = self._m
        return sp.csr_matrix((data, ind, ptr), shape=(self.n, self.n)) @ v


def _march(ops, material, cfg: BeamConfig, memory: str, stride: int, backend, refine=None) -> SolutionHistory:
    N = cfg.n_steps
    if N % stride != 0:
        raise ValueError("stride must divide the number of steps")
    mr = VolterraMarcher(ops, material, cfg.dt, memory, backend, refine)
    steps, states = mr.advance(N + 1, stride)
    hist = SolutionHistory(ops, steps * cfg.dt, states, cfg, stride)
    hist.info["lhs"] = mr.lhs
    hist.info["K0"] = mr.K
    return hist


def solve_quasi_static(ops, material: PronyMaterial | None = None, cfg: BeamConfig | None = None,
                       memory: str = "fast", stride: int = 1, backend: str | None = None) -> SolutionHistory:
    """March the mixed problem from ``t = 0`` to ``T``; returns every ``stride``-th state."""
    cfg = ops.cfg if cfg is None else cfg
    material = cfg.material if material is None else material
    if ops.kind != "mixed":
        raise ValueError("expected mixed operators")
    return _march(ops, material, cfg, memory, stride, backend)


def solve_primal(ops, material: PronyMaterial | None = None, cfg: BeamConfig | None = None,
                 memory: str = "fast", stride: int = 1, backend: str | None = None,
                 refine: int | None = None) -> SolutionHistory:
    """March the primal problem; the shear is recovered from ``(w, theta)`` on output.

    ``refine`` residual corrections (default 3) computed in long double keep
    the states accurate despite the penalty conditioning; ``0`` disables them.
    """
    cfg = ops.cfg if cfg is None else cfg
    material = cfg.material if material is None else material
    if ops.kind != "primal":
        raise ValueError("expected primal operators")
    return _march(ops, material, cfg, memory, stride, backend, refine)


def solve(ops, **kw) -> SolutionHistory:
    return solve_quasi_static(ops, **kw) if ops.kind == "mixed" else solve_primal(ops, **kw)
