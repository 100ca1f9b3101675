"""Finite equivalence transformations and pushforward of generators.

Every transformation used here is affine in the dependent variable:

    t~ = a_t t + b_t,   s~ = a_s s + b_s,   phi~ = a_phi phi + B(t, s)

with B affine in s.  Substituting into phi_tt + G phi_ss - H = 0 gives

    G~(p) = (a_s^2 / a_t^2) G((a_s p - B_s) / a_phi)
    H~(q) = (a_phi H((q - B) / a_phi) + B_tt) / a_t^2

and H~ has to come out free of t and s, otherwise the transformation does
not belong to the equivalence group of that model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import sympy as sp

from .expr import ExprError, normalize
from .model import (
    ArbitraryG,
    ArbitraryH,
    CubicPlusLinearH,
    ExponentialH,
    LinearH,
    ModelSpec,
    PowerLawH,
    ZeroH,
    phi,
    phi_s,
    s,
    t,
)
from .symmetry import Generator, specialize


class EquivalenceError(ExprError):
    pass


@dataclass(frozen=True)
class AffineMap:
    a_t: sp.Expr = sp.Integer(1)
    b_t: sp.Expr = sp.Integer(0)
    a_s: sp.Expr = sp.Integer(1)
    b_s: sp.Expr = sp.Integer(0)
    a_phi: sp.Expr = sp.Integer(1)
    B: sp.Expr = sp.Integer(0)

    def __post_init__(self):
        for f in ("a_t", "b_t", "a_s", "b_s", "a_phi", "B"):
            object.__setattr__(self, f, sp.sympify(getattr(self, f)))
        if sp.diff(self.B, s, 2) != 0 or self.B.has(phi):
            raise EquivalenceError("B must be affine in s and independent of phi")


@dataclass(frozen=True)
class EquivalenceGenerator:
    """One-parameter equivalence group with its closed-form flow.

    ``coefficients`` records the infinitesimal generator for display, keyed
    by the direction (t, s, phi, G, H, phi_s or a parameter name).
    ``applies`` decides whether the flow is an equivalence transformation
    of a given model; ``flow(eps, m)`` returns the affine map.
    """

    name: str
    coefficients: dict
    flow: Callable
    applies: Callable = field(default=lambda m: True)
    citation: str = ""
    discrete: bool = False

    def text(self):
        return " + ".join(f"({v}) d_{k}" for k, v in self.coefficients.items())


def _h_kind(m):
    h = m.h
    if isinstance(h, ZeroH):
        return "const"
    if isinstance(h, ArbitraryH) and h.expr is not None and not h.expr.has(phi):
        return "const"
    if isinstance(h, LinearH):
        return "linear"
    if isinstance(h, CubicPlusLinearH) and m.value(h.beta) == 0:
        return "linear"
    if isinstance(h, ExponentialH):
        return "exp"
    if isinstance(h, PowerLawH):
        return "power"
    return "other"


def _alpha(m):
    return m.value(m.h.alpha)


def _exp_k(eps, m):
    k = 1 + _alpha(m) * eps
    if k.is_nonpositive:
        raise EquivalenceError(f"1 + alpha*eps = {k} must be positive")
    if not k.is_positive:
        raise EquivalenceError("sign of 1 + alpha*eps is undetermined; fix alpha first")
    return AffineMap(a_phi=k, B=k * sp.log(k) / _alpha(m))


def _lin_sqrt(m):
    return sp.sqrt(sp.Abs(_alpha(m)))


def _lin_sign(sign):
    def ok(m):
        if _h_kind(m) != "linear":
            return False
        a = _alpha(m)
        return bool(a.is_negative) if sign < 0 else bool(a.is_positive)

    return ok


EQUIVALENCES = {
    g.name: g
    for g in (
        EquivalenceGenerator("E1", {"t": "1"}, lambda e, m: AffineMap(b_t=e), citation="equivalence group, X^e_1"),
        EquivalenceGenerator("E2", {"s": "1"}, lambda e, m: AffineMap(b_s=e), citation="equivalence group, X^e_2"),
        EquivalenceGenerator("E3", {"phi": "1"}, lambda e, m: AffineMap(B=e), citation="equivalence group, X^e_3"),
        EquivalenceGenerator(
            "E4",
            {"t": "t", "s": "s", "H": "-2*H", "phi_s": "-phi_s"},
            lambda e, m: AffineMap(a_t=sp.exp(e), a_s=sp.exp(e)),
            citation="equivalence group, X^e_4",
        ),
        EquivalenceGenerator(
            "E5",
            {"s": "s", "G": "2*G", "phi_s": "-phi_s"},
            lambda e, m: AffineMap(a_s=sp.exp(e)),
            citation="equivalence group, X^e_5",
        ),
        EquivalenceGenerator(
            "E6",
            {"phi": "phi", "H": "H", "phi_s": "phi_s"},
            lambda e, m: AffineMap(a_phi=sp.exp(e)),
            citation="equivalence group, X^e_6",
        ),
        EquivalenceGenerator(
            "R",
            {"phi": "phi -> -phi", "s": "s -> -s", "H": "H -> -H"},
            lambda e, m: AffineMap(a_s=-1, a_phi=-1),
            citation="involution phi -> -phi, H -> -H (composed with s -> -s)",
            discrete=True,
        ),
        EquivalenceGenerator(
            "T1",
            {"phi": "t"},
            lambda e, m: AffineMap(B=e * t),
            applies=lambda m: _h_kind(m) == "const",
            citation="Table 1, H = alpha",
        ),
        EquivalenceGenerator(
            "T2",
            {"phi": "s", "phi_s": "1"},
            lambda e, m: AffineMap(B=e * s),
            applies=lambda m: _h_kind(m) == "const",
            citation="Table 1, H = alpha",
        ),
        EquivalenceGenerator(
            "T3",
            {"phi": "t^2", "alpha": "2"},
            lambda e, m: AffineMap(B=e * t**2),
            applies=lambda m: _h_kind(m) == "const",
            citation="Table 1, H = alpha",
        ),
        EquivalenceGenerator(
            "L1",
            {"phi": "phi", "phi_s": "phi_s"},
            lambda e, m: AffineMap(a_phi=sp.exp(e)),
            applies=lambda m: _h_kind(m) == "linear",
            citation="Table 1, H = alpha phi",
        ),
        EquivalenceGenerator(
            "L2",
            {"phi": "sinh(sqrt(alpha)*t)"},
            lambda e, m: AffineMap(B=e * sp.sinh(_lin_sqrt(m) * t)),
            applies=_lin_sign(+1),
            citation="Table 1, H = alpha phi, alpha > 0",
        ),
        EquivalenceGenerator(
            "L3",
            {"phi": "cosh(sqrt(alpha)*t)"},
            lambda e, m: AffineMap(B=e * sp.cosh(_lin_sqrt(m) * t)),
            applies=_lin_sign(+1),
            citation="Table 1, H = alpha phi, alpha > 0",
        ),
        EquivalenceGenerator(
            "L4",
            {"phi": "sin(sqrt(abs(alpha))*t)"},
            lambda e, m: AffineMap(B=e * sp.sin(_lin_sqrt(m) * t)),
            applies=_lin_sign(-1),
            citation="Table 1, H = alpha phi, alpha < 0",
        ),
        EquivalenceGenerator(
            "L5",
            {"phi": "cos(sqrt(abs(alpha))*t)"},
            lambda e, m: AffineMap(B=e * sp.cos(_lin_sqrt(m) * t)),
            applies=_lin_sign(-1),
            citation="Table 1, H = alpha phi, alpha < 0",
        ),
        EquivalenceGenerator(
            "X1e",
            {"t": "t", "s": "s", "phi": "-2/alpha", "phi_s": "-phi_s"},
            lambda e, m: AffineMap(a_t=sp.exp(e), a_s=sp.exp(e), B=-2 * e / _alpha(m)),
            applies=lambda m: _h_kind(m) == "exp",
            citation="Table 1, H = exp(alpha phi)",
        ),
        EquivalenceGenerator(
            "X2e",
            {"phi": "alpha*phi + 1", "alpha": "-alpha^2", "phi_s": "alpha*phi_s"},
            _exp_k,
            applies=lambda m: _h_kind(m) == "exp",
            citation="Table 1, H = exp(alpha phi)",
        ),
        EquivalenceGenerator(
            "P1e",
            {"t": "t", "s": "s", "phi": "-2*phi/(alpha - 1)", "phi_s": "(1 + alpha)/(1 - alpha)*phi_s"},
            lambda e, m: AffineMap(a_t=sp.exp(e), a_s=sp.exp(e), a_phi=sp.exp(-2 * e / (m.value(m.h.alpha) - 1))),
            applies=lambda m: _h_kind(m) == "power",
            citation="Table 1, H = beta phi^alpha",
        ),
        EquivalenceGenerator(
            "P2e",
            {"beta": "beta", "phi": "-phi/(alpha - 1)", "phi_s": "-phi_s/(alpha - 1)"},
            lambda e, m: AffineMap(a_phi=sp.exp(-e / (m.value(m.h.alpha) - 1))),
            applies=lambda m: _h_kind(m) == "power",
            citation="Table 1, H = beta phi^alpha",
        ),
    )
}


def applicable(m: ModelSpec):
    return [E for E in EQUIVALENCES.values() if E.applies(m)]


def transform_model(A: AffineMap, m: ModelSpec):
    p, q = sp.Dummy("p"), sp.Dummy("q")
    B_s = sp.diff(A.B, s)
    B_tt = sp.diff(A.B, t, 2)
    if B_s.free_symbols & {t, s}:
        raise EquivalenceError("B_s must be constant")
    G_new = (A.a_s**2 / A.a_t**2) * m.G((A.a_s * p - B_s) / A.a_phi)
    H_new = (A.a_phi * m.H((q - A.B) / A.a_phi) + B_tt) / A.a_t**2
    H_new = normalize(H_new)
    if H_new.free_symbols & {t, s}:
        raise EquivalenceError(
            "transformed H depends on t or s; the map is not an equivalence transformation of this model"
        )
    g = ArbitraryG(normalize(G_new.subs(p, phi_s)))
    h = ArbitraryH(H_new.subs(q, phi))
    return ModelSpec(g, h, m.domain)


def push_forward(A: AffineMap, X: Generator):
    """Image of X under the point map, written in the new coordinates."""
    xi_t = A.a_t * X.xi_t
    xi_s = A.a_s * X.xi_s
    eta = A.a_phi * X.eta + sp.diff(A.B, t) * X.xi_t + sp.diff(A.B, s) * X.xi_s
    t_old = (t - A.b_t) / A.a_t
    s_old = (s - A.b_s) / A.a_s
    B_new = A.B.subs({t: t_old, s: s_old}, simultaneous=True)
    back = {t: t_old, s: s_old, phi: (phi - B_new) / A.a_phi}
    coeffs = [normalize(c.subs(back, simultaneous=True)) for c in (xi_t, xi_s, eta)]
    return Generator(X.name, *coeffs, X.domain, (), X.citation)


def apply_equivalence(E: EquivalenceGenerator, eps, m: ModelSpec, X: Generator):
    """Transform (m, X) by the finite map exp(eps E)."""
    if not E.applies(m):
        raise EquivalenceError(f"{E.name} is not an equivalence transformation of {m.describe()}")
    eps = sp.Rational(eps) if not isinstance(eps, sp.Basic) else eps
    if eps == 0 and not E.discrete:
        return m, X
    X, m = specialize(X, m)
    A = E.flow(eps, m)
    m2 = transform_model(A, m)
    X2 = push_forward(A, X)
    return m2, Generator(X2.name, X2.xi_t, X2.xi_s, X2.eta, m2.domain, (), X.citation)
