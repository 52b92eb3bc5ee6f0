"""One-dimensional partitions of the beam axis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Partition of ``[0, L]`` into consecutive elements.

    Parameters
    ----------
    nodes : array_like
        Strictly increasing node coordinates, starting at 0.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a mesh needs at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("first node must be 0")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def L(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def elements(self) -> np.ndarray:
        i = np.arange(self.n_elements)
        return np.column_stack([i, i + 1])

    @property
    def h(self) -> np.ndarray:
        """Element lengths."""
        return np.diff(self.nodes)

    @property
    def h_max(self) -> float:
        return float(self.h.max())

    def locate(self, x) -> np.ndarray:
        """Element index containing each ``x`` (left-closed; ``x = L`` maps to the last element)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > self.L):
            raise ValueError("point outside the mesh domain")
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)

    def refine(self, factor: int = 2) -> "Mesh1D":
        """Split every element into ``factor`` equal pieces."""
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        s = np.linspace(0.0, 1.0, factor + 1)[:-1]
        x0, h = self.nodes[:-1], self.h
        inner = (x0[:, None] + h[:, None] * s[None, :]).ravel()
        return Mesh1D(np.append(inner, self.L))

    def is_nested_in(self, other: "Mesh1D", tol: float = 1e-12) -> bool:
        """True when every node of ``self`` is a node of ``other``."""
        if abs(self.L - other.L) > tol * self.L:
            return False
        j = np.searchsorted(other.nodes, self.nodes)
        j = np.clip(j, 0, other.nodes.size - 1)
        jm = np.clip(j - 1, 0, other.nodes.size - 1)
        d = np.minimum(abs(other.nodes[j] - self.nodes), abs(other.nodes[jm] - self.nodes))
        return bool(np.all(d <= tol * self.L))

    def __repr__(self):
        return f"Mesh1D(n_elements={self.n_elements}, L={self.L:g}, h_max={self.h_max:g})"


def uniform_partition(L: float, n: int) -> Mesh1D:
    """``n`` equal elements on ``[0, L]``."""
    if not L > 0.0:
        raise ValueError(f"domain length must be positive, got {L}")
    if int(n) != n or n < 1:
        raise ValueError(f"element count must be a positive integer, got {n}")
    nodes = L * np.arange(int(n) + 1) / int(n)
    nodes[-1] = L
    return Mesh1D(nodes)


def merged_breakpoints(a: Mesh1D, b: Mesh1D) -> np.ndarray:
    """Sorted union of the nodes of two meshes over the same domain."""
    if abs(a.L - b.L) > 1e-12 * max(a.L, b.L):
        raise ValueError("meshes cover different domains")
    pts = np.union1d(a.nodes, b.nodes)
    # drop near-duplicates produced by round-off in non-nested ladders
    keep = np.concatenate([[True], np.diff(pts) > 1e-13 * a.L])
    pts = pts[keep]
    pts[-1] = a.L
    return pts
