"""Variational defect, divergence splitting, Noether currents and the Eulerian table."""
import numpy as np
import pytest
import sympy as sp

from lagsym.expr import EULERIAN, LAGRANGIAN, is_zero, normalize, total_derivative
from lagsym.model import ArbitraryG, ArbitraryH, ModelSpec, build_lagrangian
from lagsym.noether import (
    ConservedCurrent,
    DivergenceSplitError,
    NoEulerianRepresentation,
    NotVariational,
    is_divergence,
    match_current,
    noether_current,
    noether_identity_defect,
    reproduce_row,
    split_divergence,
    table_rows,
    to_eulerian,
    variational_defect,
    verify_eulerian_divergence,
)
from lagsym.symmetry import Generator, catalog, entry

N = LAGRANGIAN.names
t, s, phi, phi_t, phi_s = (N[k] for k in ("t", "s", "phi", "phi_t", "phi_s"))
E = EULERIAN.names
x, rho, u = E["x"], E["rho"], E["u"]


def _row(name):
    return next(r for r in table_rows() if r.name == name)


# -- defect and splitting -----------------------------------------------------


def test_time_translation_defect_vanishes():
    m = ModelSpec(ArbitraryG(), ArbitraryH())
    assert variational_defect(Generator("X1", xi_t=1), build_lagrangian(m), m) == 0


def test_galilean_defect_is_phi_t():
    m = entry("arbitrary-G-H0").model
    R = variational_defect(Generator("X4", eta=t), build_lagrangian(m), m)
    assert R == phi_t
    V = split_divergence(R)
    assert (V.V_t, V.V_s) == (phi, 0)


def test_zero_defect_splits_to_zero():
    V = split_divergence(0)
    assert V.strict


def test_scaling_on_inverse_h_is_not_a_divergence():
    """With H = beta/phi the scaling defect is 2L + beta: g(phi_s) survives."""
    m = entry("arbitrary-G-Hinv").model
    L = build_lagrangian(m)
    R = variational_defect(Generator("X5", t, s, phi), L, m)
    beta = m.domain.symbol("beta")
    assert is_zero(m.expand_antiderivatives(R - 2 * L - beta), m.domain)
    assert not is_divergence(R, m.domain)
    with pytest.raises(DivergenceSplitError):
        split_divergence(R, m.domain)
    with pytest.raises(NotVariational):
        noether_current(Generator("X5", t, s, phi), m)


def test_sine_generator_split_on_linear_h():
    e = entry("arbitrary-G-Hlin-neg")
    m = e.model
    X = e.generator("X3")
    R = variational_defect(X, build_lagrangian(m), m)
    V = split_divergence(R, m.domain)
    a = m.domain.symbol("alpha")
    w = sp.sqrt(-a)
    # V^t is proportional to w cos(w t) phi
    ratio = normalize(V.V_t / (w * sp.cos(w * t) * phi))
    assert not ratio.free_symbols - {a}
    back = total_derivative(V.V_t, "t") + total_derivative(V.V_s, "s") - R
    assert is_zero(back, m.domain)


def test_split_reports_remainder():
    with pytest.raises(DivergenceSplitError) as info:
        split_divergence(phi_t**2)
    assert info.value.remainder is not None


# -- currents -----------------------------------------------------------------


def test_zero_generator_gives_zero_current():
    m = entry("arbitrary-G-arbitrary-H").model
    c = noether_current(Generator("0"), m)
    assert (c.density, c.flux) == (0, 0)
    ce = to_eulerian(c)
    assert (ce.density, ce.flux) == (0, 0)
    assert verify_eulerian_divergence(ce, m)


def test_space_translation_current_matches_row():
    m = entry("arbitrary-G-arbitrary-H").model
    c = to_eulerian(noether_current(Generator("X2", xi_s=1), m))
    res = match_current(c, _row("ds").parse(m), m)
    assert res.matched and res.scalar == -1


def test_phi_translation_current_matches_row():
    m = entry("arbitrary-G-H0").model
    c = to_eulerian(noether_current(Generator("X3", eta=1), m))
    res = match_current(c, _row("dphi").parse(m), m)
    assert res.matched and res.scalar == 1


def test_energy_current_scalar():
    m = entry("arbitrary-G-arbitrary-H").model
    c = to_eulerian(noether_current(Generator("X1", xi_t=1), m))
    res = match_current(c, _row("dt").parse(m), m)
    assert res.matched and res.scalar == sp.Rational(-1, 2)


def test_galilean_current_eulerian_form():
    m = entry("arbitrary-G-H0").model
    c = to_eulerian(noether_current(Generator("X4", eta=t), m))
    assert is_zero(c.density + rho * (x - t * u))
    res = match_current(c, _row("t-dphi").parse(m), m)
    assert res.matched and res.scalar == -1


def test_projective_dilation_density_for_lambda_minus_four():
    r = reproduce_row(_row("lam4-dilation"))
    assert r.status == "match" and r.match.scalar == -1


def test_broken_space_translation_row_is_rejected():
    m = entry("arbitrary-G-arbitrary-H").model
    P, Q = _row("ds").parse(m)
    assert verify_eulerian_divergence(ConservedCurrent(P, Q, "eulerian"), m)
    assert not verify_eulerian_divergence(ConservedCurrent(P, Q + rho, "eulerian"), m)


def test_every_encoded_row_is_conserved():
    for r in table_rows():
        e = entry(r.entry)
        from lagsym.symmetry import specialize

        _, m = specialize(e.generator(r.generator), e.model)
        P, Q = r.parse(m)
        ok = verify_eulerian_divergence(ConservedCurrent(P, Q, "eulerian"), m)
        # the cosh row is the one known misprint
        assert ok == (r.name != "cosh-dphi"), r.name


def test_cosh_row_differs_from_printed():
    r = reproduce_row(_row("cosh-dphi"))
    assert r.status == "differs-from-printed"
    assert not r.match.matched
    assert r.corrected.matched and r.corrected.scalar == -1


def test_scaling_monitor_has_no_eulerian_image():
    e = entry("power-G-H0")
    m = e.model.specialize({"lam": -3})
    X = e.generator("Xv")
    c = noether_current(X.subs({X.domain.symbol("lam"): -3}), m)
    assert c.density.has(s)
    with pytest.raises(NoEulerianRepresentation):
        to_eulerian(c)


def test_eulerian_conversion_rejects_eulerian_input():
    c = ConservedCurrent(rho, rho * u, "eulerian")
    with pytest.raises(Exception):
        to_eulerian(c)


# -- off-shell identity -------------------------------------------------------


def _variational():
    out = []
    for e in catalog():
        for X in e.generators:
            try:
                out.append((e, X, noether_current(X, e.model)))
            except NotVariational:
                pass
    return out


@pytest.fixture(scope="module")
def variational():
    return _variational()


def test_off_shell_identity_holds_with_zeta_times_residual(variational):
    """D_t T^t + D_s T^s = zeta (phi_tt + G phi_ss - H), for every variational symmetry."""
    assert len(variational) >= 60
    for e, X, c in variational:
        assert is_zero(noether_identity_defect(c, X, e.model, sign=-1), c.model.domain), (e.name, X.name)


def test_opposite_sign_identity_fails(variational):
    """The sign is not a convention: adding zeta times the residual does not cancel."""
    for e, X, c in variational:
        if X.zeta() == 0:
            continue
        assert not is_zero(noether_identity_defect(c, X, e.model, sign=1), c.model.domain), (e.name, X.name)


def test_identity_on_an_explicit_test_function():
    """Independent route for one current: plain sympy diff on a concrete non-solution."""
    m = entry("power-G-H0").model.specialize({"lam": -4})
    X = Generator("X7", t**2, 0, t * phi)
    c = noether_current(X, m)
    T, S = sp.symbols("T S")
    f = S + T**2 * S / 7 + sp.sin(T * S) / 9
    jets = {t: T, s: S, phi: f, phi_t: f.diff(T), phi_s: f.diff(S)}
    Tt, Ts = (m.expand_antiderivatives(e).subs(jets, simultaneous=True) for e in (c.density, c.flux))
    div = Tt.diff(T) + Ts.diff(S)
    zeta = (T * f - T**2 * f.diff(T))
    res = f.diff(T, 2) - f.diff(S) ** -4 * f.diff(S, 2)
    g = sp.lambdify((T, S), div - zeta * res)
    for tv, sv in np.random.default_rng(1).uniform(0.2, 1.0, size=(20, 2)):
        assert abs(g(tv, sv)) < 1e-10
