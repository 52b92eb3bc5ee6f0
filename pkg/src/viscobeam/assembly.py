"""Discrete operators of the mixed (and the primal) beam formulation.

Unknown layout: ``u = (w, theta)`` restricted to unconstrained DOFs, followed by
the shear ``gamma``.  The saddle matrix is ``[[A, B^T], [B, -C]]`` with

* ``A``: ``(I_hat theta', eta')``;
* ``B``: ``(gamma, eta - v')``;
* ``C``: ``lam (gamma / A_hat, psi)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .beam import BeamConfig, boundary_constraints
from .fe import (
    C0,
    DISCONTINUOUS,
    CoeffVec,
    FeSpace,
    QuadratureRule,
    _assemble_pair,
    gauss_rule,
    lagrange_basis,
    mass_matrix,
    stiffness_matrix,
)
from .linalg import singular_values
from .mesh import Mesh1D, uniform_partition


@dataclass
class LoadTerm:
    """Space-time separable load functional.

    The functional tested against ``(eta, v)`` is
    ``(w_value, v) + (w_slope, v') + (theta_value, eta) + (theta_slope, eta')``,
    multiplied by ``temporal(t)``.  Unused pieces are ``None``.
    """

    temporal: Callable
    w_value: Optional[Callable] = None
    w_slope: Optional[Callable] = None
    theta_value: Optional[Callable] = None
    theta_slope: Optional[Callable] = None


def _functional(space: FeSpace, value, slope, rule: QuadratureRule) -> np.ndarray:
    out = np.zeros(space.n_dofs)
    if value is None and slope is None:
        return out
    val, der = lagrange_basis(space.degree, rule.points)
    x, w, elem = space.quadrature_points(rule)
    nq = rule.n_points
    if value is not None:
        fx = np.broadcast_to(np.asarray(value(x), dtype=float), x.shape)
        local = (w * fx).reshape(-1, nq) @ val
        np.add.at(out, space.dofmap.ravel(), local.ravel())
    if slope is not None:
        fx = np.broadcast_to(np.asarray(slope(x), dtype=float), x.shape)
        scale = 2.0 / space.mesh.h[elem]
        local = (w * fx * scale).reshape(-1, nq) @ der
        np.add.at(out, space.dofmap.ravel(), local.ravel())
    return out


def default_loads(cfg: BeamConfig) -> list[LoadTerm]:
    scale = cfg.load_scale
    return [LoadTerm(temporal=cfg.load.temporal, w_value=lambda x: np.full_like(x, scale))]


@dataclass(eq=False)
class _Layout:
    Vw: FeSpace
    Vtheta: FeSpace
    Q: Optional[FeSpace]
    free_w: np.ndarray
    free_theta: np.ndarray

    @property
    def n_w(self) -> int:
        return self.free_w.size

    @property
    def n_theta(self) -> int:
        return self.free_theta.size

    @property
    def n_u(self) -> int:
        return self.n_w + self.n_theta

    @property
    def n_q(self) -> int:
        return 0 if self.Q is None else self.Q.n_dofs

    @property
    def n(self) -> int:
        return self.n_u + self.n_q

    def restrict_u(self, full_w: np.ndarray, full_theta: np.ndarray) -> np.ndarray:
        return np.concatenate([full_w[self.free_w], full_theta[self.free_theta]])

    def expand_u(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full coefficient arrays of ``w`` and ``theta`` (constrained entries zero).

        ``x`` may carry a leading batch axis.
        """
        x = np.asarray(x)
        w = np.zeros(x.shape[:-1] + (self.Vw.n_dofs,))
        th = np.zeros(x.shape[:-1] + (self.Vtheta.n_dofs,))
        w[..., self.free_w] = x[..., : self.n_w]
        th[..., self.free_theta] = x[..., self.n_w : self.n_u]
        return w, th

    def coords(self, with_shear: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates and block ids of the unknowns, used for band reordering."""
        parts = [self.Vw.dof_coords[self.free_w], self.Vtheta.dof_coords[self.free_theta]]
        ids = [np.zeros(self.n_w), np.ones(self.n_theta)]
        if with_shear and self.Q is not None:
            xq = self.Q.dof_coords
            # nudge shear DOFs into their element so that neighbours do not interleave
            elem = np.repeat(np.arange(self.Q.mesh.n_elements), self.Q.n_local)
            mid = 0.5 * (self.Q.mesh.nodes[elem] + self.Q.mesh.nodes[elem + 1])
            parts.append(xq + 1e-6 * (mid - xq))
            ids.append(np.full(self.n_q, 2))
        return np.concatenate(parts), np.concatenate(ids)


@dataclass(eq=False)
class DiscreteOperators:
    """Matrices of the mixed semi-discrete problem on unconstrained DOFs."""

    cfg: BeamConfig
    layout: _Layout
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    load_terms: list  # [(vector over u, temporal)]
    norm_V: sp.csr_matrix
    norm_Q: sp.csr_matrix
    quad: QuadratureRule

    kind = "mixed"

    @property
    def n(self) -> int:
        return self.layout.n

    def coords(self):
        return self.layout.coords()

    def saddle(self) -> sp.csr_matrix:
        return sp.bmat([[self.A, self.B.T], [self.B, -self.C]], format="csr")

    def memory(self) -> sp.csr_matrix:
        """Rows carrying the hereditary integral: ``[[A, B^T], [0, 0]]``."""
        top = sp.hstack([self.A, self.B.T])
        return sp.vstack([top, sp.csr_matrix((self.layout.n_q, self.n))], format="csr")

    def load_matrix(self) -> tuple[np.ndarray, list]:
        """Spatial load vectors (columns, full system size) and their time profiles."""
        F = np.zeros((self.n, len(self.load_terms)))
        for k, (vec, _) in enumerate(self.load_terms):
            F[: self.layout.n_u, k] = vec
        return F, [g for _, g in self.load_terms]

    def load(self, t: float) -> np.ndarray:
        F, g = self.load_matrix()
        return F @ np.array([float(gk(t)) for gk in g]) if g else np.zeros(self.n)

    def split(self, x: np.ndarray) -> dict:
        """Coefficient arrays ``{'w', 'theta', 'gamma'}`` of a state (or batch of states)."""
        w, th = self.layout.expand_u(x)
        return {"w": w, "theta": th, "gamma": np.asarray(x)[..., self.layout.n_u :]}

    def functions(self, x: np.ndarray) -> dict:
        parts = self.split(x)
        L = self.layout
        return {
            "w": CoeffVec(L.Vw, parts["w"]),
            "theta": CoeffVec(L.Vtheta, parts["theta"]),
            "gamma": CoeffVec(L.Q, parts["gamma"]),
        }

    def spaces(self) -> dict:
        return {"w": self.layout.Vw, "theta": self.layout.Vtheta, "gamma": self.layout.Q}


@dataclass(eq=False)
class PrimalOperators:
    """Displacement-rotation stiffness with the shear energy kept as a penalty.

    ``K = K_bend + S^T diag(D) S`` where ``S`` samples the shear strain
    ``theta - w'`` at the shear quadrature points and ``D`` holds the penalty
    ``A_hat / lam`` times the quadrature weights.  The factors are kept so that
    residuals and the recovered shear can be formed in extended precision: the
    penalty makes ``K`` ill-conditioned as ``lam -> 0``.
    """

    cfg: BeamConfig
    layout: _Layout
    K: sp.csr_matrix
    load_terms: list
    K_bend: sp.csr_matrix
    S: sp.csr_matrix
    D: np.ndarray  # long double
    Psi: sp.csr_matrix  # shear basis at the shear quadrature points
    wq: np.ndarray  # shear quadrature weights
    quad_shear: QuadratureRule

    kind = "primal"

    def __post_init__(self):
        self._Kb_ld = self.K_bend.astype(np.longdouble)
        self._S_ld = self.S.astype(np.longdouble)
        self._Psi_ld = self.Psi.astype(np.longdouble)
        self._MQ = spla.splu(sp.csc_matrix(self.Psi.T @ sp.diags(self.wq) @ self.Psi))

    @property
    def n(self) -> int:
        return self.layout.n_u

    def coords(self):
        return self.layout.coords(with_shear=False)

    def saddle(self) -> sp.csr_matrix:
        return self.K

    def memory(self) -> sp.csr_matrix:
        return self.K

    def apply_accurate(self, v: np.ndarray) -> np.ndarray:
        """``K v`` in long double from the unassembled factors."""
        v = np.asarray(v, dtype=np.longdouble)
        return self._Kb_ld @ v + self._S_ld.T @ (self.D * (self._S_ld @ v))

    def recover_gamma(self, x: np.ndarray) -> np.ndarray:
        """Shear ``(A_hat / lam)(theta - w')`` projected onto the discontinuous space."""
        x = np.asarray(x)
        X = x.reshape(-1, self.n).T.astype(np.longdouble)
        rhs = self._Psi_ld.T @ (self.D[:, None] * (self._S_ld @ X))
        # the mass solve is well conditioned, so double precision suffices here
        G = self._MQ.solve(np.asarray(rhs, dtype=float))
        return G.T.reshape(x.shape[:-1] + (-1,))

    load_matrix = DiscreteOperators.load_matrix
    load = DiscreteOperators.load

    def split(self, x: np.ndarray) -> dict:
        w, th = self.layout.expand_u(np.asarray(x, dtype=float))
        return {"w": w, "theta": th, "gamma": self.recover_gamma(x)}

    functions = DiscreteOperators.functions
    spaces = DiscreteOperators.spaces


def make_spaces(cfg: BeamConfig, mesh: Mesh1D, r: int) -> tuple[FeSpace, FeSpace, FeSpace]:
    """Constrained ``V_h^r`` for ``w`` and ``theta`` and discontinuous ``Q_h^r``."""
    if abs(mesh.L - cfg.L) > 1e-12 * cfg.L:
        raise ValueError("mesh length differs from the beam length")
    Vw = FeSpace(mesh, r, C0)
    Vth = FeSpace(mesh, r, C0)
    bw, bth = boundary_constraints(cfg, Vw, Vth)
    return Vw.with_constraints(bw), Vth.with_constraints(bth), FeSpace(mesh, r - 1, DISCONTINUOUS)


def _check_meshes(*spaces):
    ref = spaces[0].mesh
    for V in spaces[1:]:
        if V.mesh is not ref and not (
            V.mesh.n_elements == ref.n_elements and np.allclose(V.mesh.nodes, ref.nodes, rtol=0, atol=1e-14 * ref.L)
        ):
            raise ValueError("all spaces must share one mesh")


def _layout(Vw, Vth, Q) -> _Layout:
    return _Layout(Vw, Vth, Q, Vw.free_dofs, Vth.free_dofs)


def _coupling(Vw, Vth, Q, rule):
    """``(psi, eta) - (psi, v')`` on full (unconstrained) index sets, as two blocks."""
    Bw = -_assemble_pair(Q, Vw, rule, 0, 1)
    Bth = _assemble_pair(Q, Vth, rule, 0, 0)
    return Bw, Bth


def _u_loads(cfg, layout, loads, rule):
    out = []
    for term in loads:
        fw = _functional(layout.Vw, term.w_value, term.w_slope, rule)
        fth = _functional(layout.Vtheta, term.theta_value, term.theta_slope, rule)
        out.append((layout.restrict_u(fw, fth), term.temporal))
    return out


def _h1_norm(layout, rule):
    Vw, Vth = layout.Vw, layout.Vtheta
    Nw = (stiffness_matrix(Vw, rule) + mass_matrix(Vw, rule)).tocsr()
    Nth = (stiffness_matrix(Vth, rule) + mass_matrix(Vth, rule)).tocsr()
    Nw = Nw[layout.free_w][:, layout.free_w]
    Nth = Nth[layout.free_theta][:, layout.free_theta]
    return sp.block_diag([Nw, Nth], format="csr")


def assemble(
    cfg: BeamConfig,
    Vw: FeSpace,
    Vtheta: FeSpace,
    Q: FeSpace,
    quad: QuadratureRule | None = None,
    loads: list[LoadTerm] | None = None,
) -> DiscreteOperators:
    """Assemble the mixed operators; Dirichlet DOFs are removed symmetrically."""
    _check_meshes(Vw, Vtheta, Q)
    r = max(Vw.degree, Vtheta.degree)
    if Q.is_continuous:
        raise ValueError("the shear space must be discontinuous")
    if not cfg.lam > 0.0:
        raise ValueError("lam must be positive")
    if quad is None:
        quad = gauss_rule(r + 1)
    if quad.exactness_degree < 2 * r:
        raise ValueError(
            f"quadrature exact to degree {quad.exactness_degree} < {2 * r} needed for degree-{r} elements"
        )
    layout = _layout(Vw, Vtheta, Q)
    Ath = stiffness_matrix(Vtheta, quad) * cfg.I_hat
    Ath = Ath.tocsr()[layout.free_theta][:, layout.free_theta]
    A = sp.block_diag([sp.csr_matrix((layout.n_w, layout.n_w)), Ath], format="csr")
    Bw, Bth = _coupling(Vw, Vtheta, Q, quad)
    B = sp.hstack([Bw.tocsc()[:, layout.free_w], Bth.tocsc()[:, layout.free_theta]], format="csr")
    C = (mass_matrix(Q, quad) * (cfg.lam / cfg.A_hat)).tocsr()
    loads = default_loads(cfg) if loads is None else loads
    norm_V = _h1_norm(layout, quad)
    norm_Q = mass_matrix(Q, quad).tocsr()
    return DiscreteOperators(cfg, layout, A, B, C, _u_loads(cfg, layout, loads, quad), norm_V, norm_Q, quad)


def assemble_primal(
    cfg: BeamConfig,
    Vw: FeSpace,
    Vtheta: FeSpace,
    quad_bend: QuadratureRule | None = None,
    quad_shear: QuadratureRule | None = None,
    loads: list[LoadTerm] | None = None,
) -> PrimalOperators:
    """Primal stiffness ``(I_hat theta', eta') + lam^-1 (A_hat (theta - w'), eta - v')``.

    ``quad_shear`` selects exact (``r + 1`` points) or reduced (``r`` points)
    integration of the shear energy.
    """
    _check_meshes(Vw, Vtheta)
    r = max(Vw.degree, Vtheta.degree)
    if not cfg.lam > 0.0:
        raise ValueError("lam must be positive")
    quad_bend = gauss_rule(r + 1) if quad_bend is None else quad_bend
    quad_shear = gauss_rule(r + 1) if quad_shear is None else quad_shear
    if quad_bend.exactness_degree < 2 * r - 2:
        raise ValueError("bending quadrature is not exact for the stiffness integrand")
    Q = FeSpace(Vw.mesh, r - 1, DISCONTINUOUS)
    layout = _layout(Vw, Vtheta, Q)
    fw, fth = layout.free_w, layout.free_theta
    Ath = (stiffness_matrix(Vtheta, quad_bend) * cfg.I_hat).tocsr()[fth][:, fth]
    K_bend = sp.block_diag([sp.csr_matrix((layout.n_w, layout.n_w)), Ath], format="csr")
    # shear strain theta - w' sampled at the shear quadrature points
    x, wq, _ = Vw.quadrature_points(quad_shear)
    S = sp.hstack(
        [-Vw.eval_matrix(x, 1).tocsc()[:, fw], Vtheta.eval_matrix(x, 0).tocsc()[:, fth]], format="csr"
    )
    D = np.longdouble(cfg.A_hat) / np.longdouble(cfg.lam) * wq.astype(np.longdouble)
    K = (K_bend + S.T @ sp.diags(np.asarray(D, dtype=float)) @ S).tocsr()
    Psi = Q.eval_matrix(x, 0)
    loads = default_loads(cfg) if loads is None else loads
    return PrimalOperators(
        cfg, layout, K, _u_loads(cfg, layout, loads, gauss_rule(r + 3)), K_bend, S, D, Psi, wq, quad_shear
    )


def build_mixed(cfg: BeamConfig, n: int, r: int, loads=None) -> DiscreteOperators:
    """Uniform mesh with ``n`` elements and the degree-``r`` mixed pair."""
    Vw, Vth, Q = make_spaces(cfg, uniform_partition(cfg.L, n), r)
    return assemble(cfg, Vw, Vth, Q, loads=loads)


def build_primal(cfg: BeamConfig, n: int, r: int, integration: str = "exact", loads=None) -> PrimalOperators:
    """Primal operators with ``integration`` in {"exact", "reduced"}."""
    Vw, Vth, _ = make_spaces(cfg, uniform_partition(cfg.L, n), r)
    if integration == "exact":
        qs = gauss_rule(r + 1)
    elif integration == "reduced":
        qs = gauss_rule(r)
    else:
        raise ValueError(f"unknown integration {integration!r}")
    return assemble_primal(cfg, Vw, Vth, gauss_rule(r + 1), qs, loads=loads)


def inf_sup_constant(B, norm_V, norm_Q, rtol: float = 1e-10) -> float:
    """Smallest nonzero singular value of ``N_Q^{-1/2} B N_V^{-1/2}``."""
    B = B.toarray() if sp.issparse(B) else np.asarray(B, dtype=float)
    NV = norm_V.toarray() if sp.issparse(norm_V) else np.asarray(norm_V, dtype=float)
    NQ = norm_Q.toarray() if sp.issparse(norm_Q) else np.asarray(norm_Q, dtype=float)
    try:
        LV = np.linalg.cholesky(NV)
        LQ = np.linalg.cholesky(NQ)
    except np.linalg.LinAlgError as exc:
        raise ValueError("norm matrices must be symmetric positive definite") from exc
    M = sla.solve_triangular(LQ, B, lower=True)
    M = sla.solve_triangular(LV, M.T, lower=True).T
    s = singular_values(M)
    nz = s[s > rtol * s.max()] if s.size and s.max() > 0 else s[:0]
    if nz.size == 0:
        raise ValueError("coupling matrix is zero")
    return float(nz.min())


def dump_matrix_market(ops, directory) -> list[str]:
    """Write the operator blocks as MatrixMarket coordinate files."""
    from scipy.io import mmwrite

    os.makedirs(directory, exist_ok=True)
    blocks = {"A": ops.A, "B": ops.B, "C": ops.C} if ops.kind == "mixed" else {"K": ops.K}
    paths = []
    for name, M in blocks.items():
        path = os.path.join(directory, f"{name}.mtx")
        mmwrite(path, sp.coo_matrix(M))
        paths.append(path)
    return paths
