"""Equivalence transformations: finite maps, pushforwards and closure."""
import numpy as np
import pytest
import sympy as sp

from lagsym.equivalence import (
    EQUIVALENCES,
    AffineMap,
    EquivalenceError,
    applicable,
    apply_equivalence,
    push_forward,
    transform_model,
)
from lagsym.expr import LAGRANGIAN, G, H, is_zero
from lagsym.symmetry import catalog, check_admitted, entry

N = LAGRANGIAN.names
t, s, phi, phi_s = N["t"], N["s"], N["phi"], N["phi_s"]


def test_time_space_scaling_rescales_h():
    e = entry("arbitrary-G-Hlin-neg")
    eps = sp.Rational(1, 3)
    m2, _ = apply_equivalence(EQUIVALENCES["E4"], eps, e.model, e.generator("X3"))
    a = e.model.domain.symbol("alpha")
    assert is_zero(m2.H(phi) - a * sp.exp(-2 * eps) * phi, m2.domain)
    # phi_s -> phi_s e^-eps, so the new G reads the old one at e^eps phi_s
    assert m2.G(phi_s) == G(phi_s * sp.exp(eps))


def test_involution_flips_h():
    e = entry("arbitrary-G-arbitrary-H")
    m2, X2 = apply_equivalence(EQUIVALENCES["R"], 0, e.model, e.generator("X1"))
    assert m2.G(phi_s) == G(phi_s)
    assert m2.H(phi) == -H(-phi)
    assert X2.xi_t == 1


def test_zero_parameter_is_identity():
    e = entry("power-G-H0")
    X = e.generator("X6")
    for name in ("E1", "E4", "E5", "E6", "T1"):
        m2, X2 = apply_equivalence(EQUIVALENCES[name], 0, e.model, X)
        assert m2 is e.model and X2 is X


def test_inapplicable_transformation_raises():
    e = entry("arbitrary-G-H0")
    with pytest.raises(EquivalenceError):
        apply_equivalence(EQUIVALENCES["L2"], sp.Rational(1, 2), e.model, e.generator("X3"))


def test_affine_map_needs_affine_shift():
    with pytest.raises(EquivalenceError):
        AffineMap(B=s**2)


def test_non_equivalence_shift_detected():
    e = entry("arbitrary-G-arbitrary-H")
    with pytest.raises(EquivalenceError, match="depends on t or s"):
        transform_model(AffineMap(B=t), e.model)


def test_exp_shift_needs_positive_factor():
    e = entry("power-G-Hexp")
    m = e.model.specialize({"alpha": 2, "lam": -3})
    with pytest.raises(EquivalenceError):
        EQUIVALENCES["X2e"].flow(sp.Rational(-1), m)


def test_pushforward_of_translation_is_translation():
    A = AffineMap(a_t=2, b_t=1, a_s=3, a_phi=5)
    X = entry("power-G-H0").generator("X1")
    Y = push_forward(A, X)
    assert (Y.xi_t, Y.xi_s, Y.eta) == (2, 0, 0)


def _random_triples(n, seed):
    rng = np.random.default_rng(seed)
    entries = catalog()
    out = []
    while len(out) < n:
        e = entries[rng.integers(len(entries))]
        E = applicable(e.model)
        E = E[rng.integers(len(E))]
        X = e.generators[rng.integers(len(e.generators))]
        eps = sp.Rational(int(rng.integers(-50, 51)), 100)
        out.append((e, E, X, eps))
    return out


@pytest.mark.parametrize("idx", range(20))
def test_pushforward_stays_admitted(idx):
    e, E, X, eps = _random_triples(20, seed=2024)[idx]
    try:
        m2, X2 = apply_equivalence(E, eps, e.model, X)
    except EquivalenceError:
        pytest.skip(f"{E.name} at eps={eps} leaves its validity domain for {e.name}")
    ok, R = check_admitted(X2, m2)
    assert ok, (e.name, E.name, X.name, eps, R)


def test_every_transform_on_every_entry_small_eps():
    """All applicable (entry, transform, generator) triples at one fixed eps."""
    eps = sp.Rational(1, 4)
    checked = 0
    for e in catalog():
        for E in applicable(e.model):
            X = e.generators[-1]
            try:
                m2, X2 = apply_equivalence(E, eps, e.model, X)
            except EquivalenceError:
                continue
            ok, R = check_admitted(X2, m2)
            assert ok, (e.name, E.name, X.name, R)
            checked += 1
    assert checked > 100
