"""Timoshenko beam geometry, thickness scaling, loads and boundary conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .fe import FeSpace
from .material import PronyMaterial, sls_material

CLAMPED = "clamped"
SIMPLY_SUPPORTED = "simply-supported"
_BC_ALIASES = {
    "clamped": CLAMPED,
    "clamped-clamped": CLAMPED,
    "simply-supported": SIMPLY_SUPPORTED,
    "simply_supported": SIMPLY_SUPPORTED,
    "ss": SIMPLY_SUPPORTED,
}

SCALED = "scaled"
PHYSICAL = "physical"


def heaviside(t):
    """Unit step with ``H(0) = 1``."""
    return np.where(np.asarray(t, dtype=float) >= 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class Load:
    """Distributed transverse load ``amplitude * profile(x) * g(t)``.

    ``convention`` says what ``amplitude`` measures: ``"scaled"`` means the
    thickness-independent load ``q`` of the rescaled problem, ``"physical"``
    means the applied load ``q~ = eps^3 q``.
    """

    type: str = "heaviside"
    amplitude: float = 8.0
    convention: str = SCALED
    ramp_time: float = 1.0

    def __post_init__(self):
        if self.type not in ("heaviside", "constant", "ramp"):
            raise ValueError(f"unknown load type {self.type!r}")
        if self.convention not in (SCALED, PHYSICAL):
            raise ValueError(f"unknown load convention {self.convention!r}")
        if self.type == "ramp" and not self.ramp_time > 0.0:
            raise ValueError("ramp_time must be positive")

    def temporal(self, t):
        t = np.asarray(t, dtype=float)
        if self.type == "ramp":
            return np.clip(t / self.ramp_time, 0.0, 1.0)
        return heaviside(t)

    @classmethod
    def from_dict(cls, d: dict) -> "Load":
        return cls(
            type=d.get("type", "heaviside"),
            amplitude=float(d.get("amplitude", 8.0)),
            convention=d.get("convention", SCALED),
            ramp_time=float(d.get("ramp_time", 1.0)),
        )

    def to_dict(self) -> dict:
        d = {"type": self.type, "amplitude": self.amplitude, "convention": self.convention}
        if self.type == "ramp":
            d["ramp_time"] = self.ramp_time
        return d


@dataclass(frozen=True)
class BeamConfig:
    """Homogeneous rectangular beam on ``[0, L]``.

    The rescaled coefficients ``I_hat = I / eps^3`` and ``A_hat = ks A / eps`` do
    not depend on the thickness ``d``; only ``lam = 2 (1 + nu) eps^2`` does.
    """

    L: float = 4.0
    b: float = 0.08
    d: float = 0.1
    ks: float = 5.0 / 6.0
    material: PronyMaterial = field(default_factory=sls_material)
    bc: str = CLAMPED
    load: Load = field(default_factory=Load)
    T: float = 10.0
    dt: float = 2e-3

    def __post_init__(self):
        for name in ("L", "b", "d", "ks", "T", "dt"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        bc = _BC_ALIASES.get(str(self.bc).lower())
        if bc is None:
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        object.__setattr__(self, "bc", bc)
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
            raise ValueError(f"T / dt = {ratio} is not an integer")

    @classmethod
    def from_dict(cls, d: dict) -> "BeamConfig":
        kw = {k: float(d[k]) for k in ("L", "b", "d", "ks", "T", "dt") if k in d}
        if "material" in d:
            kw["material"] = PronyMaterial.from_dict(d["material"])
        if "bc" in d:
            kw["bc"] = d["bc"]
        if "load" in d:
            kw["load"] = Load.from_dict(d["load"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "L": self.L, "b": self.b, "d": self.d, "ks": self.ks,
            "material": self.material.to_dict(), "bc": self.bc,
            "load": self.load.to_dict(), "T": self.T, "dt": self.dt,
        }

    def replace(self, **kw) -> "BeamConfig":
        return replace(self, **kw)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def I(self) -> float:
        return self.b * self.d**3 / 12.0

    @property
    def A(self) -> float:
        return self.b * self.d

    @property
    def eps2(self) -> float:
        return self.I / (self.A * self.L**2)

    @property
    def eps(self) -> float:
        return math.sqrt(self.eps2)

    @property
    def lam(self) -> float:
        return 2.0 * (1.0 + self.material.nu) * self.eps2

    @property
    def I_hat(self) -> float:
        return self.I / self.eps**3

    @property
    def A_hat(self) -> float:
        return self.ks * self.A / self.eps

    @property
    def load_scale(self) -> float:
        """Factor turning ``amplitude`` into the normalised load ``q_E = q / E(0)``."""
        q = self.load.amplitude
        if self.load.convention == PHYSICAL:
            q = q / self.eps**3
        return q / self.material.E0


def scaled_load(cfg: BeamConfig, x, t):
    """Normalised load ``q_E(x, t)`` entering the rescaled problem."""
    xx = np.asarray(x, dtype=float)
    if np.any(xx < 0.0) or np.any(xx > cfg.L):
        raise ValueError("x outside the beam")
    out = cfg.load_scale * cfg.load.temporal(t) * np.ones_like(xx)
    return float(out) if np.ndim(out) == 0 else out


def boundary_constraints(cfg: BeamConfig, Vw: FeSpace, Vtheta: FeSpace) -> tuple[frozenset, frozenset]:
    """Constrained DOF indices of the displacement and rotation spaces."""
    for V in (Vw, Vtheta):
        if not V.is_continuous:
            raise ValueError("boundary constraints apply to continuous spaces")
        if abs(V.mesh.L - cfg.L) > 1e-12 * cfg.L:
            raise ValueError("space mesh does not match the beam length")
    ends_w = frozenset({0, Vw.n_dofs - 1})
    if cfg.bc == CLAMPED:
        return ends_w, frozenset({0, Vtheta.n_dofs - 1})
    if cfg.bc == SIMPLY_SUPPORTED:
        return ends_w, frozenset()
    raise ValueError(f"unknown boundary condition {cfg.bc!r}")
