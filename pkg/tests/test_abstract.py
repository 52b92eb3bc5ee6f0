import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscobeam import abstract as ab
from viscobeam.linalg import NumericalFailure


def test_measured_beta_of_scaled_identity():
    beta = 0.37
    s = ab.AbstractSystem(np.eye(4), beta * np.eye(4), np.eye(4))
    assert s.measured["beta"] == pytest.approx(beta, rel=1e-14)


def test_identity_a():
    B = np.array([[1.0, 0.0, 0.0]])
    s = ab.AbstractSystem(np.eye(3), B, np.eye(1))
    assert s.measured["alpha0"] == pytest.approx(1.0) and s.measured["norm_a"] == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_generator_hits_targets(seed, alpha0, beta, gamma0):
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(3, 21))
    nq = int(rng.integers(2, min(nv, 10) + 1))
    rank = int(rng.integers(2, nq + 1))
    s = ab.random_system(nv, nq, alpha0=alpha0, beta=beta, gamma0=gamma0, norm_b=2.0, rank=rank, seed=seed)
    m = s.measured
    assert m["beta"] == pytest.approx(beta, abs=1e-8)
    assert m["norm_b"] == pytest.approx(2.0, abs=1e-8)
    assert m["rank_b"] == rank
    if rank < nv:
        assert m["alpha0"] == pytest.approx(alpha0, abs=1e-8)
    if rank < nq:
        assert m["gamma0"] == pytest.approx(gamma0, abs=1e-8)
    assert np.linalg.eigvalsh(s.A).min() > -1e-10 and np.linalg.eigvalsh(s.C).min() > -1e-10


def test_generator_deterministic():
    a = ab.random_system(8, 5, seed=3)
    b = ab.random_system(8, 5, seed=3)
    for x, y in ((a.A, b.A), (a.B, b.B), (a.C, b.C)):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("kw", [
    dict(alpha0=3.0, scale_a=2.0), dict(beta=3.0, norm_b=2.0), dict(gamma0=-1.0), dict(rank=0),
    dict(rank=1, beta=0.5, norm_b=2.0),
])
def test_generator_rejects(kw):
    with pytest.raises(ValueError):
        ab.random_system(6, 3, **kw)
    with pytest.raises(ValueError):
        ab.random_system(2, 3)


def test_system_validation():
    with pytest.raises(ValueError):
        ab.AbstractSystem(np.eye(2), np.ones((1, 3)), np.eye(1))
    with pytest.raises(ValueError):
        ab.AbstractSystem(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones((1, 2)), np.eye(1))
    with pytest.raises(ValueError):
        ab.ExpKernel(1.0, 1.0)(0.0, 1.0)


def test_kernels_within_bounds():
    s = ab.random_system(5, 3, kernels=(ab.ExpKernel(-0.3, 2.0), ab.ExpKernel(0.2, 1.0), ab.ZERO, ab.ExpKernel(0.1, 0.5)))
    assert s.kernel_bounds == (0.3, 0.2, 0.0, 0.1)
    assert s.kernel_bounds_ok()


def test_zero_kernels_static_and_constant():
    s = ab.random_system(9, 4, rank=3, seed=2)
    rng = np.random.default_rng(0)
    f0, g0 = rng.standard_normal(9), rng.standard_normal(4)
    N = 20
    tr = ab.solve_volterra(s, np.tile(f0, (N + 1, 1)), np.tile(g0, (N + 1, 1)), 0.05)
    u, p = ab.static_solve(s, f0, g0)
    assert np.abs(tr.u - u).max() <= 1e-12 * np.abs(u).max()
    assert np.abs(tr.p - p).max() <= 1e-12 * np.abs(p).max()


def test_scalar_resolvent_second_order():
    c = 0.7
    s = ab.AbstractSystem(np.eye(1), np.zeros((1, 1)), np.eye(1), (ab.ExpKernel(c, 0.0), ab.ZERO, ab.ZERO, ab.ZERO))
    errs = []
    for N in (20, 40, 80):
        dt = 1.0 / N
        tr = ab.solve_volterra(s, np.ones((N + 1, 1)), np.zeros((N + 1, 1)), dt)
        errs.append(np.abs(tr.u[:, 0] - np.exp(c * tr.times)).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.03)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.03)


def test_singular_block():
    s = ab.AbstractSystem(np.zeros((2, 2)), np.zeros((1, 2)), np.zeros((1, 1)))
    with pytest.raises(NumericalFailure):
        ab.solve_volterra(s, np.zeros((3, 2)), np.zeros((3, 1)), 0.1)


def test_solver_input_checks():
    s = ab.random_system(4, 2)
    with pytest.raises(ValueError):
        ab.solve_volterra(s, np.zeros((3, 3)), np.zeros((3, 2)), 0.1)
    with pytest.raises(ValueError):
        ab.solve_volterra(s, np.zeros((3, 4)), np.zeros((3, 2)), 0.0)


P = dict(norm_a=1.3, norm_c=2.0, alpha0=0.5, gamma0=0.4, beta=0.7, Ck=(0.3, 0.2, 0.1, 0.4), T=1.0)


def test_mt1_kernel_free_forms():
    q = dict(P, Ck=(0.0, 0.0, 0.0, 0.0))
    C = ab.constants_mt1(q)
    a, c, al, ga, be = (q[k] for k in ("norm_a", "norm_c", "alpha0", "gamma0", "beta"))
    assert C["C1"] == pytest.approx(a / be**2)
    assert C["chi_p"] == 0.0 and C["chi_u"] == 0.0 and C["Cp0"] == 1.0 and C["Cu0"] == 1.0
    assert C["C2"] == pytest.approx(C["C1"] * math.sqrt(c / ga))
    assert C["C9"] == pytest.approx(c / be**2)
    assert C["C3"] == pytest.approx((1 + q["T"]) * (math.sqrt(a * c) + be) / be**2)
    assert ab.constants_mt1(dict(q, norm_a=1.0, beta=1.0))["C1"] == 1.0


def test_mt1_duplicate_path():
    for T in (0.0, 0.5, 1.0, 2.0):
        q = dict(P, T=T)
        a, b = ab.constants_mt1(q), ab.constants_mt1_reference(q)
        for k in b:
            assert a[k] == pytest.approx(b[k], rel=1e-12), k


def test_mt1_strict_c4():
    C = ab.constants_mt1(P)
    assert C["C4_strict"] == pytest.approx(C["C3"] * C["C4"])


def test_mt2_limits():
    q = dict(P, Ck=(0.0, 0.0, 0.0, 0.0))
    C = ab.constants_mt2(q, lam=1e-12)
    assert C["C2"] == pytest.approx(1 / q["alpha0"], rel=1e-9)
    assert C["C4"] == pytest.approx(2 * q["norm_a"] / q["beta"] ** 2, rel=1e-9)
    C0 = ab.constants_mt2(q, lam=1e-300)
    assert C0["C4"] == pytest.approx(4 * q["norm_a"] / (2 * q["beta"] ** 2))
    with pytest.raises(ValueError):
        ab.constants_mt2(q, lam=0.0)


def test_constants_monotone_in_T():
    prev1 = prev2 = None
    for T in (0.0, 1.0, 10.0):
        c1 = ab.constants_mt1(dict(P, T=T))
        c2 = ab.constants_mt2(dict(P, T=T), lam=1e-3)
        assert all(v > 0 for v in c1.values() if v != 0.0)
        if prev1 is not None:
            assert all(c1[k] >= prev1[k] for k in prev1)
            assert all(c2[k] >= prev2[k] for k in ("C1", "C3", "M1", "M2", "Cu1", "Cu2"))
        prev1, prev2 = c1, c2
    assert all(np.isfinite(v) for v in ab.constants_mt1(dict(P, T=1.0)).values())


def test_p_bar_bound_without_memory():
    s = ab.random_system(8, 5, rank=3, seed=11)
    dt = 0.01
    f, g = ab.random_data(s, dt, seed=1)
    PK, PH = ab.split(s)
    f = np.zeros_like(f)
    g = g - g @ PH  # g0 = 0
    tr = ab.solve_volterra(s, f, g, dt)
    lhs = ab.l1_norm(tr.p - tr.p @ PH, tr.times)
    rhs = s.measured["norm_a"] / s.measured["beta"] ** 2 * ab.l1_norm(g, tr.times)
    assert lhs <= rhs
    assert ab.verify_bound(s, tr, (f, g), ab.constants_mt1(s)).holds


def test_splitting_consistency():
    s = ab.random_system(10, 6, rank=4, seed=5)
    PK, _ = ab.split(s)
    v = np.random.default_rng(1).standard_normal(10)
    vbar = v - PK @ v
    np.testing.assert_allclose(s.B @ v, s.B @ vbar, atol=1e-13)


def test_corollary_with_g0():
    s = ab.random_system(8, 5, rank=3, seed=4, kernels=(ab.ExpKernel(-0.3, 1.0),) * 2 + (ab.ZERO, ab.ZERO))
    sl = s.with_lambda(1e-4)
    dt = 0.01
    f, g = ab.random_data(sl, dt, seed=2)
    _, PH = ab.split(sl)
    assert ab.l1_norm(g @ PH, np.arange(len(g)) * dt) > 0
    tr = ab.solve_volterra(sl, f, g, dt)
    rep = ab.verify_bound(sl, tr, (f, g), ab.constants_mt2(sl), "cor210")
    assert rep.holds
    # the estimate for p0 is attained: p0 = -g0 / lam
    np.testing.assert_allclose(tr.p @ PH, -(g @ PH) / 1e-4, rtol=1e-8, atol=1e-8 * np.abs(g).max() / 1e-4)


def test_verify_bound_checks_shapes():
    s = ab.random_system(4, 2)
    f, g = ab.random_data(s, 0.1)
    tr = ab.solve_volterra(s, f, g, 0.1)
    with pytest.raises(ValueError):
        ab.verify_bound(s, tr, (f[:-1], g[:-1]), ab.constants_mt1(s))
    with pytest.raises(ValueError):
        ab.verify_bound(s, tr, (f, g), ab.constants_mt1(s), "mt3")


def test_lambda_sweep_bounded():
    base = ab.random_system(8, 4, seed=9, kernels=(ab.ExpKernel(-0.2, 1.0), ab.ExpKernel(-0.1, 2.0), ab.ZERO, ab.ZERO))
    f, g = ab.random_data(base, 0.01, seed=3)
    norms = []
    for lam in (1e-2, 1e-4, 1e-6, 1e-8):
        s = base.with_lambda(lam)
        tr = ab.solve_volterra(s, f, g, 0.01)
        rep = ab.verify_bound(s, tr, (f, g), ab.constants_mt2(s), "mt2", derived_c2=True)
        assert rep.holds and rep.slack > 0
        norms.append(ab.l1_norm(tr.u, tr.times) + ab.l1_norm(tr.p, tr.times))
    assert max(norms) / min(norms) < 2.0
