"""Standard Linear Solid relaxation functions and the Volterra kernel they induce."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PronyMaterial:
    """One-term Prony series (Standard Linear Solid).

    ``E(t) = E_inf + (k1 - E_inf) exp(-t / tau)`` with ``E_inf = k1 k2 / (k1 + k2)``
    and ``tau = eta / (k1 + k2)``.  Additional relaxation terms ``(E_i, tau_i)``
    may be appended through ``extra_terms``; they add to ``E(0)``.

    With ``elastic=True`` the memory is switched off: ``E(t) = E(0)`` and the
    kernel vanishes identically.
    """

    k1: float
    k2: float
    eta: float
    nu: float = 0.35
    elastic: bool = False
    extra_terms: tuple = ()

    def __post_init__(self):
        for name in ("k1", "k2", "eta"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")
        terms = tuple((float(e), float(t)) for e, t in self.extra_terms)
        if any(e <= 0.0 or t <= 0.0 for e, t in terms):
            raise ValueError("extra Prony terms need positive modulus and time")
        object.__setattr__(self, "extra_terms", terms)

    @classmethod
    def from_dict(cls, d: dict) -> "PronyMaterial":
        return cls(
            k1=float(d["k1"]),
            k2=float(d["k2"]),
            eta=float(d["eta"]),
            nu=float(d.get("nu", 0.35)),
            elastic=bool(d.get("elastic", False)),
            extra_terms=tuple(tuple(t) for t in d.get("extra_terms", ())),
        )

    def to_dict(self) -> dict:
        d = {"k1": self.k1, "k2": self.k2, "eta": self.eta, "nu": self.nu}
        if self.elastic:
            d["elastic"] = True
        if self.extra_terms:
            d["extra_terms"] = [list(t) for t in self.extra_terms]
        return d

    def as_elastic(self) -> "PronyMaterial":
        return PronyMaterial(self.k1, self.k2, self.eta, self.nu, True, self.extra_terms)

    @property
    def E_inf(self) -> float:
        return self.k1 * self.k2 / (self.k1 + self.k2)

    @property
    def tau(self) -> float:
        return self.eta / (self.k1 + self.k2)

    @property
    def E0(self) -> float:
        return self.k1 + sum(e for e, _ in self.extra_terms)

    @property
    def relaxation_terms(self) -> list[tuple[float, float]]:
        """``(modulus, time)`` pairs of the decaying part of ``E``."""
        # k1 - E_inf written without cancellation
        return [(self.k1**2 / (self.k1 + self.k2), self.tau), *self.extra_terms]

    @property
    def kernel_terms(self) -> list[tuple[float, float]]:
        """Kernel as ``sum kappa_i exp(-(t - s) / tau_i)``; empty when elastic."""
        if self.elastic:
            return []
        return [(-e / (t * self.E0), t) for e, t in self.relaxation_terms]


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("time must be non-negative")
    return t


def _scalar(x, like):
    return float(x) if np.ndim(like) == 0 else x


def relaxation_modulus(m: PronyMaterial, t):
    """``E(t)`` in N/m^2."""
    tt = _check_time(t)
    if m.elastic:
        return _scalar(np.full_like(tt, m.E0), t)
    out = m.E0 - sum(e for e, _ in m.relaxation_terms) + sum(
        e * np.exp(-tt / tau) for e, tau in m.relaxation_terms
    )
    return _scalar(out, t)


def shear_modulus(m: PronyMaterial, t):
    """``G(t) = E(t) / (2 (1 + nu))``."""
    return relaxation_modulus(m, t) / (2.0 * (1.0 + m.nu))


def kernel(m: PronyMaterial, t, s):
    """``dE/dt(t - s) / E(0)`` on the triangle ``0 <= s <= t``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0) or np.any(s > t):
        raise ValueError("kernel is defined for 0 <= s <= t")
    lag = t - s
    out = np.zeros(np.broadcast(t, s).shape)
    for kappa, tau in m.kernel_terms:
        out = out + kappa * np.exp(-lag / tau)
    return float(out) if out.ndim == 0 else out


def kernel_bound(m: PronyMaterial) -> float:
    """Supremum of ``|kernel|`` over the triangle (attained at ``t = s``)."""
    return float(sum(abs(kappa) for kappa, _ in m.kernel_terms))


def sls_material(nu: float = 0.35) -> PronyMaterial:
    """SLS parameters used in the beam experiments."""
    return PronyMaterial(k1=9.8e7, k2=2.44e7, eta=2.74e8, nu=nu)


def creep_factor(m: PronyMaterial, t):
    """Closed-form solution ``phi`` of ``phi(t) = 1 + int_0^t k(t - s) phi(s) ds``.

    Valid for a single kernel term (or the elastic switch, where ``phi = 1``).
    """
    tt = _check_time(t)
    terms = m.kernel_terms
    if not terms:
        return _scalar(np.ones_like(tt), t)
    if len(terms) != 1:
        raise ValueError("closed form only for one-term kernels")
    kappa, tau = terms[0]
    mu = 1.0 / tau - kappa
    a = 1.0 / (tau * mu)
    return _scalar(a + (1.0 - a) * np.exp(-mu * tt), t)


def creep_factor_integral(m: PronyMaterial, T: float) -> float:
    """``int_0^T phi(t) dt`` for :func:`creep_factor`."""
    terms = m.kernel_terms
    if not terms:
        return float(T)
    kappa, tau = terms[0]
    mu = 1.0 / tau - kappa
    a = 1.0 / (tau * mu)
    return a * T + (1.0 - a) * (1.0 - math.exp(-mu * T)) / mu
