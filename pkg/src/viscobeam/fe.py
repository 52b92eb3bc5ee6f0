"""Lagrange finite element spaces on 1D meshes.

Two families are used by the beam discretisation:

* continuous piecewise polynomials of degree ``r`` (displacement, rotation);
* discontinuous piecewise polynomials of degree ``r - 1`` (shear).

Degrees of freedom are numbered left to right, so the global numbering of a
continuous space is already sorted by coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh1D

C0 = "C0"
DISCONTINUOUS = "discontinuous"

MAX_DEGREE = 4


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def n_points(self) -> int:
        return self.points.size


def gauss_rule(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule on ``[-1, 1]`` with ``n_points`` nodes."""
    if int(n_points) != n_points or not 1 <= n_points <= 10:
        raise ValueError(f"n_points must be an integer in [1, 10], got {n_points}")
    x, w = np.polynomial.legendre.leggauss(int(n_points))
    return QuadratureRule(x, w, 2 * int(n_points) - 1)


def rule_for_degree(degree: int) -> QuadratureRule:
    """Smallest Gauss rule integrating polynomials of ``degree`` exactly."""
    return gauss_rule(max(1, (int(degree) + 2) // 2))


def reference_nodes(degree: int) -> np.ndarray:
    """Equispaced Lagrange nodes on ``[-1, 1]`` (the midpoint for degree 0)."""
    if degree == 0:
        return np.zeros(1)
    return np.linspace(-1.0, 1.0, degree + 1)


def lagrange_basis(degree: int, xi) -> tuple[np.ndarray, np.ndarray]:
    """Values and d/dxi of the reference Lagrange basis at ``xi``.

    Returns two arrays of shape ``(len(xi), degree + 1)``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    nodes = reference_nodes(degree)
    m = nodes.size
    val = np.ones((xi.size, m))
    der = np.zeros((xi.size, m))
    for a in range(m):
        others = [nodes[b] for b in range(m) if b != a]
        denom = np.prod([nodes[a] - xb for xb in others]) if others else 1.0
        factors = [xi - xb for xb in others]
        val[:, a] = np.prod(factors, axis=0) / denom if others else 1.0
        for k in range(len(others)):
            term = np.ones_like(xi)
            for j, fj in enumerate(factors):
                if j != k:
                    term = term * fj
            der[:, a] += term
        der[:, a] /= denom
    return val, der


@dataclass(eq=False)
class FeSpace:
    """Scalar Lagrange space on a mesh.

    ``boundary_dofs`` holds the constrained global indices (empty for
    discontinuous spaces); constraints are attached by the beam model.
    """

    mesh: Mesh1D
    degree: int
    continuity: str = C0
    boundary_dofs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.continuity not in (C0, DISCONTINUOUS):
            raise ValueError(f"unknown continuity {self.continuity!r}")
        if int(self.degree) != self.degree or not 0 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree must be in [0, {MAX_DEGREE}]")
        if self.continuity == C0 and self.degree < 1:
            raise ValueError("continuous spaces need degree >= 1")
        if self.continuity == DISCONTINUOUS and self.boundary_dofs:
            raise ValueError("discontinuous spaces carry no boundary constraints")
        self.degree = int(self.degree)
        self.boundary_dofs = frozenset(int(i) for i in self.boundary_dofs)

    @property
    def is_continuous(self) -> bool:
        return self.continuity == C0

    @property
    def n_local(self) -> int:
        return self.degree + 1

    @property
    def n_dofs(self) -> int:
        n = self.mesh.n_elements
        if self.is_continuous:
            return self.degree * n + 1
        return (self.degree + 1) * n

    @property
    def dofmap(self) -> np.ndarray:
        """``(n_elements, degree + 1)`` local-to-global index table."""
        e = np.arange(self.mesh.n_elements)[:, None]
        k = np.arange(self.n_local)[None, :]
        if self.is_continuous:
            return e * self.degree + k
        return e * self.n_local + k

    @property
    def dof_coords(self) -> np.ndarray:
        x0 = self.mesh.nodes[:-1][:, None]
        h = self.mesh.h[:, None]
        local = x0 + 0.5 * (reference_nodes(self.degree)[None, :] + 1.0) * h
        coords = np.empty(self.n_dofs)
        coords[self.dofmap.ravel()] = local.ravel()
        return coords

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[list(self.boundary_dofs)] = False
        return np.flatnonzero(mask)

    def with_constraints(self, dofs) -> "FeSpace":
        return FeSpace(self.mesh, self.degree, self.continuity, frozenset(dofs))

    def eval_matrix(self, x, deriv: int = 0) -> sp.csr_matrix:
        """Sparse ``(len(x), n_dofs)`` map from coefficients to values (or slopes) at ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        elem = self.mesh.locate(x)
        return self._eval_in_elements(x, elem, deriv)

    def _eval_in_elements(self, x, elem, deriv: int) -> sp.csr_matrix:
        x0 = self.mesh.nodes[elem]
        h = self.mesh.h[elem]
        xi = 2.0 * (x - x0) / h - 1.0
        if deriv not in (0, 1):
            raise ValueError("only values and first derivatives are supported")
        val, der = lagrange_basis(self.degree, xi)
        data = val if deriv == 0 else der * (2.0 / h)[:, None]
        rows = np.repeat(np.arange(x.size), self.n_local)
        cols = self.dofmap[elem].ravel()
        return sp.csr_matrix((data.ravel(), (rows, cols)), shape=(x.size, self.n_dofs))

    def quadrature_points(self, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical points, weights and owning elements of ``rule`` on every element."""
        x0 = self.mesh.nodes[:-1][:, None]
        h = self.mesh.h[:, None]
        x = x0 + 0.5 * (rule.points[None, :] + 1.0) * h
        w = 0.5 * h * rule.weights[None, :]
        elem = np.repeat(np.arange(self.mesh.n_elements), rule.n_points)
        return x.ravel(), w.ravel(), elem


@dataclass(eq=False)
class CoeffVec:
    """Coefficients of a finite element function in ``space``."""

    space: FeSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.n_dofs,):
            raise ValueError(
                f"expected {self.space.n_dofs} coefficients, got shape {self.values.shape}"
            )

    def __call__(self, x):
        return eval_fe(self.space, self, x)

    def derivative(self, x):
        return eval_fe(self.space, self, x, deriv=1)


def eval_fe(space: FeSpace, coeffs, x, deriv: int = 0):
    """Evaluate a finite element function (or its derivative) at ``x``."""
    values = coeffs.values if isinstance(coeffs, CoeffVec) else np.asarray(coeffs, dtype=float)
    if values.shape != (space.n_dofs,):
        raise ValueError("coefficient vector does not match the space")
    scalar = np.ndim(x) == 0
    out = space.eval_matrix(x, deriv) @ values
    return float(out[0]) if scalar else out


def lagrange_interpolate(space: FeSpace, f: Callable) -> CoeffVec:
    """Nodal interpolant of ``f`` in a continuous space."""
    if not space.is_continuous:
        raise ValueError("Lagrange interpolation targets continuous spaces")
    x = space.dof_coords
    return CoeffVec(space, np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy())


def l2_project(space: FeSpace, f: Callable, rule: QuadratureRule | None = None) -> CoeffVec:
    """Elementwise L2 projection of ``f`` onto a discontinuous space."""
    if space.is_continuous:
        raise ValueError("L2 projection is implemented for discontinuous spaces")
    if rule is None:
        rule = gauss_rule(min(10, space.degree + 4))
    val, _ = lagrange_basis(space.degree, rule.points)
    x, w, _ = space.quadrature_points(rule)
    nq = rule.n_points
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).reshape(-1, nq)
    w = w.reshape(-1, nq)
    # element mass matrices and load vectors, solved in one batch
    mass = np.einsum("eq,qa,qb->eab", w, val, val)
    rhs = np.einsum("eq,eq,qa->ea", w, fx, val)
    local = np.linalg.solve(mass, rhs[..., None])[..., 0]
    coeffs = np.empty(space.n_dofs)
    coeffs[space.dofmap.ravel()] = local.ravel()
    return CoeffVec(space, coeffs)


def mass_matrix(space: FeSpace, rule: QuadratureRule | None = None, weight=None) -> sp.csr_matrix:
    """Global ``(phi_i, weight * phi_j)`` matrix (``weight`` constant or callable)."""
    return _assemble_pair(space, space, rule, 0, 0, weight)


def stiffness_matrix(space: FeSpace, rule: QuadratureRule | None = None, weight=None) -> sp.csr_matrix:
    """Global ``(phi_i', weight * phi_j')`` matrix."""
    return _assemble_pair(space, space, rule, 1, 1, weight)


def _assemble_pair(test: FeSpace, trial: FeSpace, rule, d_test: int, d_trial: int, weight=None):
    """``sum_e int weight * D^d_test(psi_i) D^d_trial(phi_j)`` on a shared mesh."""
    if test.mesh is not trial.mesh and not np.array_equal(test.mesh.nodes, trial.mesh.nodes):
        raise ValueError("spaces live on different meshes")
    if rule is None:
        rule = rule_for_degree(test.degree + trial.degree)
    mesh = test.mesh
    h = mesh.h
    vt, dt_ = lagrange_basis(test.degree, rule.points)
    vs, ds = lagrange_basis(trial.degree, rule.points)
    bt = vt if d_test == 0 else dt_
    bs = vs if d_trial == 0 else ds
    x, w, _ = test.quadrature_points(rule)
    w = w.reshape(-1, rule.n_points)
    if weight is not None:
        wx = np.broadcast_to(np.asarray(weight(x) if callable(weight) else weight, dtype=float), x.shape)
        w = w * wx.reshape(w.shape)
    scale = (2.0 / h) ** (d_test + d_trial)
    local = np.einsum("eq,qa,qb->eab", w, bt, bs) * scale[:, None, None]
    rows = np.repeat(test.dofmap, trial.n_local, axis=1).ravel()
    cols = np.tile(trial.dofmap, (1, test.n_local)).ravel()
    return sp.csr_matrix(
        (local.ravel(), (rows, cols)), shape=(test.n_dofs, trial.n_dofs)
    )


def load_vector(space: FeSpace, f: Callable, rule: QuadratureRule | None = None) -> np.ndarray:
    """``(f, phi_i)`` for every basis function."""
    if rule is None:
        rule = gauss_rule(min(10, space.degree + 4))
    val, _ = lagrange_basis(space.degree, rule.points)
    x, w, _ = space.quadrature_points(rule)
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    local = (w * fx).reshape(-1, rule.n_points) @ val
    out = np.zeros(space.n_dofs)
    np.add.at(out, space.dofmap.ravel(), local.ravel())
    return out
