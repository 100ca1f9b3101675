"""Model families, Lagrangian, Euler-Lagrange residual and the Eulerian system."""
import logging

import numpy as np
import pytest
import sympy as sp
from sympy.calculus.euler import euler_equations

from lagsym.expr import EULERIAN, LAGRANGIAN, ParameterDomain, is_zero, normalize
from lagsym.expr import G as G_opaque
from lagsym.model import (
    ArbitraryG,
    ArbitraryH,
    CubicPlusLinearH,
    ExponentialG,
    LinearH,
    ModelError,
    ModelSpec,
    PowerG,
    ZeroH,
    build_lagrangian,
    check_hyperbolic,
    euler_lagrange,
    eulerian_system,
    residual,
)
from lagsym.symmetry import catalog

phi, phi_t, phi_s, phi_tt, phi_ss = (LAGRANGIAN.names[k] for k in ("phi", "phi_t", "phi_s", "phi_tt", "phi_ss"))
E = EULERIAN.names


def _second_antiderivative_ok(m):
    g = m.expand_antiderivatives(m.gfun(phi_s))
    return normalize(sp.diff(g, phi_s, 2) - m.G(phi_s)) == 0


def test_shallow_water_lagrangian():
    m = ModelSpec(PowerG(-3), ZeroH())
    L = build_lagrangian(m)
    assert normalize(L - phi_t**2 / 2 - m.gfun(phi_s)) == 0
    assert m.G(phi_s) == -(phi_s**-3)
    assert _second_antiderivative_ok(m)


def test_linear_h_lagrangian():
    m = ModelSpec(ArbitraryG(), LinearH("alpha"), {"alpha": "nonzero"})
    L = build_lagrangian(m)
    assert L.has(m.hfun)
    h = m.expand_antiderivatives(m.hfun(phi))
    assert normalize(sp.diff(h, phi) - m.domain.symbol("alpha") * phi) == 0


def test_exponential_g_lagrangian():
    m = ModelSpec(ExponentialG(1), ZeroH())
    assert m.G(phi_s) == -sp.exp(phi_s)
    assert _second_antiderivative_ok(m)
    assert not build_lagrangian(m).has(m.hfun)


def test_euler_lagrange_generic_is_the_residual():
    m = ModelSpec(ArbitraryG(), ArbitraryH())
    assert normalize(euler_lagrange(build_lagrangian(m)) - residual(m)) == 0


def test_euler_lagrange_free_particle():
    assert euler_lagrange(phi_t**2 / 2) == phi_tt


def test_euler_lagrange_against_independent_variational_derivative():
    """Power(-4), H = beta phi^-3 + alpha phi, cross-checked with sympy's own operator."""
    m = ModelSpec(PowerG(-4), CubicPlusLinearH("alpha", "beta"), {"alpha": "nonzero", "beta": "real"})
    L = m.expand_antiderivatives(build_lagrangian(m))
    T, S = sp.symbols("T S")
    f = sp.Function("f")(T, S)
    Lf = L.subs({phi_t: f.diff(T), phi_s: f.diff(S), phi: f}, simultaneous=True)
    (eq,) = euler_equations(Lf, [f], [T, S])
    back = {f.diff(T, 2): phi_tt, f.diff(S, 2): phi_ss, f.diff(T): phi_t, f.diff(S): phi_s}
    oracle = eq.lhs.subs(back).subs(f, phi)
    a, b = m.domain.symbol("alpha"), m.domain.symbol("beta")
    expected = phi_tt - phi_s**-4 * phi_ss - b * phi**-3 - a * phi
    mine = euler_lagrange(L)
    assert is_zero(mine - expected, m.domain)
    # sympy's convention is L_phi - D L_{phi_i}: the opposite sign
    assert is_zero(mine + oracle, m.domain)


def test_every_catalog_model_has_the_standard_residual():
    for e in catalog():
        m = e.model
        assert is_zero(euler_lagrange(build_lagrangian(m)) - residual(m), m.domain), e.name


def test_eulerian_gamma_form():
    # G(1/rho) = -g1 rho^2 (rho + g2)  <=>  G(p) = -g1 p^-3 - g1 g2 p^-2
    d = ParameterDomain.from_json({"g1": "positive", "g2": "positive"})
    g1, g2 = d.symbol("g1"), d.symbol("g2")
    m = ModelSpec(ArbitraryG(-g1 * phi_s**-3 - g1 * g2 * phi_s**-2), ZeroH(), d)
    r1, r2 = eulerian_system(m)
    assert is_zero(r1 - (E["rho_t"] + E["u"] * E["rho_x"] + E["rho"] * E["u_x"]))
    target = E["u_t"] + E["u"] * E["u_x"] + g1 * (1 + g2 / E["rho"]) * E["rho_x"]
    assert is_zero(r2 - target, d)


def test_eulerian_shallow_water_with_bottom():
    m = ModelSpec(PowerG(-3), ArbitraryH())
    _, r2 = eulerian_system(m)
    target = E["u_t"] + E["u"] * E["u_x"] + E["rho_x"] - m.H(E["x"])
    assert is_zero(r2 - target)


def test_eulerian_no_source_without_h():
    m = ModelSpec(ArbitraryG(), ZeroH())
    _, r2 = eulerian_system(m)
    assert not r2.has(E["x"])


def test_power_family_rejects_degenerate_exponents():
    for lam in (0, 1):
        with pytest.raises(ModelError):
            PowerG(lam)


def test_linear_constant_is_dropped(caplog):
    with caplog.at_level(logging.WARNING):
        h = LinearH(2, 5)
    assert h.beta == 0
    assert "dropping" in caplog.text


def test_undeclared_parameter_rejected():
    with pytest.raises(ModelError):
        ModelSpec(PowerG("lam"), ZeroH())


def test_json_round_trip():
    for e in catalog():
        m = e.model
        again = ModelSpec.from_json(m.to_json())
        assert again.G() == m.G() and again.H() == m.H(), e.name


def test_catalog_families_are_hyperbolic():
    rng = np.random.default_rng(3)
    for e in catalog():
        if e.model.G().has(G_opaque):
            continue
        ok, bad = check_hyperbolic(e.model, samples=50, rng=rng)
        assert ok, (e.name, bad[:3])


def test_non_hyperbolic_g_is_flagged():
    ok, bad = check_hyperbolic(ModelSpec(ArbitraryG(phi_s**2), ZeroH()), samples=20)
    assert not ok and bad
