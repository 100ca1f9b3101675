"""Point symmetry generators, second prolongation and the classification catalog."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import sympy as sp

from .expr import (
    LAGRANGIAN,
    ExprError,
    ParameterDomain,
    is_zero,
    normalize,
    to_text,
    total_derivative,
)
from .model import (
    ModelSpec,
    on_shell,
    phi,
    phi_s,
    phi_ss,
    phi_t,
    phi_ts,
    phi_tt,
    residual,
    s,
    t,
)

_BASE = (t, s, phi)


class SymmetryError(ExprError):
    pass


class AnsatzError(SymmetryError):
    """Generator coefficients fall outside the reduced ansatz."""


@dataclass(frozen=True)
class Generator:
    """X = xi_t d_t + xi_s d_s + eta d_phi.

    ``when`` fixes parameter values under which the generator is admitted
    (for example ``{"lam": -4}``); the model is specialized accordingly
    before any check.
    """

    name: str
    xi_t: sp.Expr = sp.Integer(0)
    xi_s: sp.Expr = sp.Integer(0)
    eta: sp.Expr = sp.Integer(0)
    domain: ParameterDomain = field(default_factory=ParameterDomain)
    when: tuple = ()
    citation: str = ""

    def __post_init__(self):
        for f in ("xi_t", "xi_s", "eta"):
            e = sp.sympify(getattr(self, f))
            jets = [v for v in e.free_symbols if LAGRANGIAN.order_of(v) >= 1]
            if jets:
                raise SymmetryError(f"generator {self.name}: {f} depends on derivatives {jets}")
            object.__setattr__(self, f, e)
        if isinstance(self.when, dict):
            object.__setattr__(self, "when", tuple(sorted((k, sp.Rational(v)) for k, v in self.when.items())))

    @property
    def coefficients(self):
        return self.xi_t, self.xi_s, self.eta

    @property
    def conditions(self):
        return dict(self.when)

    def zeta(self):
        """Characteristic eta - xi_t phi_t - xi_s phi_s."""
        return self.eta - self.xi_t * phi_t - self.xi_s * phi_s

    def subs(self, bindings):
        b = {k: sp.sympify(v) for k, v in bindings.items()}
        return Generator(
            self.name,
            self.xi_t.subs(b),
            self.xi_s.subs(b),
            self.eta.subs(b),
            self.domain,
            self.when,
            self.citation,
        )

    def scaled(self, k):
        return Generator(self.name, k * self.xi_t, k * self.xi_s, k * self.eta, self.domain, self.when, self.citation)

    def __add__(self, other):
        return Generator(
            f"{self.name}+{other.name}",
            self.xi_t + other.xi_t,
            self.xi_s + other.xi_s,
            self.eta + other.eta,
            self.domain.merged(other.domain),
        )

    def __call__(self, F):
        """Apply the base (unprolonged) vector field."""
        F = sp.sympify(F)
        return self.xi_t * sp.diff(F, t) + self.xi_s * sp.diff(F, s) + self.eta * sp.diff(F, phi)

    def text(self):
        parts = []
        for c, d in ((self.xi_t, "d_t"), (self.xi_s, "d_s"), (self.eta, "d_phi")):
            c = normalize(c)
            if c != 0:
                parts.append(f"({to_text(c)}) {d}")
        return " + ".join(parts) or "0"

    def to_json(self):
        out = {"name": self.name, "xi_t": to_text(self.xi_t), "xi_s": to_text(self.xi_s), "eta": to_text(self.eta)}
        if self.when:
            out["when"] = {k: str(v) for k, v in self.when}
        if self.citation:
            out["citation"] = self.citation
        return out

    @classmethod
    def from_json(cls, obj, model: ModelSpec):
        coeffs = [model.parse(str(obj.get(k, "0"))) for k in ("xi_t", "xi_s", "eta")]
        return cls(obj["name"], *coeffs, model.domain, obj.get("when", {}), obj.get("citation", ""))


@dataclass(frozen=True)
class ProlongedGenerator:
    base: Generator
    zeta_t: sp.Expr
    zeta_s: sp.Expr
    zeta_tt: sp.Expr
    zeta_ts: sp.Expr
    zeta_ss: sp.Expr

    def pairs(self):
        b = self.base
        return (
            (t, b.xi_t),
            (s, b.xi_s),
            (phi, b.eta),
            (phi_t, self.zeta_t),
            (phi_s, self.zeta_s),
            (phi_tt, self.zeta_tt),
            (phi_ts, self.zeta_ts),
            (phi_ss, self.zeta_ss),
        )

    def __call__(self, F):
        F = sp.sympify(F)
        return sp.Add(*[c * sp.diff(F, v) for v, c in self.pairs() if c != 0])

    def first_order(self, F):
        """Action of the first prolongation (ignores second-order jets)."""
        F = sp.sympify(F)
        return sp.Add(*[c * sp.diff(F, v) for v, c in self.pairs()[:5] if c != 0])


def prolong1(X: Generator):
    Dt = {d: total_derivative(c, "t") for d, c in zip("tsp", X.coefficients)}
    Ds = {d: total_derivative(c, "s") for d, c in zip("tsp", X.coefficients)}
    zt = Dt["p"] - phi_t * Dt["t"] - phi_s * Dt["s"]
    zs = Ds["p"] - phi_t * Ds["t"] - phi_s * Ds["s"]
    return zt, zs, Dt, Ds


def prolong2(X: Generator, normal=True) -> ProlongedGenerator:
    """Second prolongation by the standard total-derivative recursion.

    ``normal=False`` keeps the raw recursion output, which is what the
    numeric half of the zero test evaluates.
    """
    zt, zs, Dt, Ds = prolong1(X)
    ztt = total_derivative(zt, "t") - phi_tt * Dt["t"] - phi_ts * Dt["s"]
    zts = total_derivative(zt, "s") - phi_tt * Ds["t"] - phi_ts * Ds["s"]
    zss = total_derivative(zs, "s") - phi_ts * Ds["t"] - phi_ss * Ds["s"]
    zetas = (zt, zs, ztt, zts, zss)
    if normal:
        zetas = tuple(normalize(z) for z in zetas)
    return ProlongedGenerator(X, *zetas)


def specialize(X: Generator, m: ModelSpec):
    """Apply the generator's parameter conditions to both X and m."""
    if not X.when:
        return X, m
    cond = X.conditions
    m2 = m.specialize({k: v for k, v in cond.items() if k in m.domain})
    subs = {m.domain.symbol(k): v for k, v in cond.items() if k in m.domain}
    X2 = X.subs(subs)
    return Generator(X2.name, X2.xi_t, X2.xi_s, X2.eta, m2.domain, (), X.citation), m2


def admitted_residual(X: Generator, m: ModelSpec, normal=True):
    """pr2 X applied to the equation residual, restricted to solutions."""
    X, m = specialize(X, m)
    pr = prolong2(X, normal=False)
    R = sp.sympify(pr(residual(m))).subs(on_shell(m))
    return (normalize(R) if normal else R), m


def check_admitted(X: Generator, m: ModelSpec, samples=100, rng=None):
    """(verdict, simplified on-shell residual).

    The numeric route evaluates the raw residual, never the normal form.
    """
    R, m2 = admitted_residual(X, m, normal=False)
    domain = m2.domain.merged(X.domain.without(list(m.domain) + list(m2.domain)))
    return is_zero(R, domain, samples=samples, rng=rng), normalize(R)


# ---------------------------------------------------------------------------
# classifying equations


def _constant(e, what):
    e = normalize(e)
    if e.free_symbols & set(_BASE):
        raise AnsatzError(f"{what} = {to_text(e)} is not constant")
    return e


def reduced_ansatz(X: Generator):
    """Extract (xi_t(t), C1, C2, C3, tau1(t), tau2(t)) from X."""
    xi_t, xi_s, eta = (normalize(c) for c in X.coefficients)
    if xi_t.free_symbols & {s, phi}:
        raise AnsatzError(f"xi_t = {to_text(xi_t)} depends on s or phi")
    C1 = _constant(sp.diff(xi_s, s), "d xi_s/ds")
    C2 = _constant(xi_s - C1 * s, "xi_s - C1 s")
    a = normalize(sp.diff(eta, phi))
    if a.free_symbols & {s, phi}:
        raise AnsatzError(f"d eta/d phi = {to_text(a)} depends on s or phi")
    C3 = _constant(a - sp.diff(xi_t, t) / 2, "d eta/d phi - xi_t'/2")
    rest = normalize(eta - a * phi)
    tau1 = normalize(sp.diff(rest, s))
    if tau1.free_symbols & {s, phi}:
        raise AnsatzError(f"d eta/ds = {to_text(tau1)} depends on s or phi")
    tau2 = normalize(rest - tau1 * s)
    if tau2.free_symbols & {s, phi}:
        raise AnsatzError(f"eta is not affine in s: remainder {to_text(tau2)}")
    return xi_t, C1, C2, C3, tau1, tau2


def classifying_residuals(X: Generator, m: ModelSpec):
    """The three classifying-equation left-hand sides for X under model m."""
    X, m = specialize(X, m)
    xi_t, C1, C2, C3, tau1, tau2 = reduced_ansatz(X)
    p, q = phi_s, phi
    Gp, Gv = sp.diff(m.G(p), p), m.G(p)
    Hp, Hv = sp.diff(m.H(q), q), m.H(q)
    xd = sp.diff(xi_t, t)
    R1 = ((xd / 2 + C3 - C1) * p + tau1) * Gp + 2 * (xd - C1) * Gv
    R2 = ((xd / 2 + C3) * q + tau2) * Hp - (C3 - sp.Rational(3, 2) * xd) * Hv - sp.diff(xi_t, t, 3) * q / 2 - sp.diff(tau2, t, 2)
    R3 = tau1 * Hp - sp.diff(tau1, t, 2)
    return tuple(normalize(r) for r in (R1, R2, R3)), m


# ---------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    model: ModelSpec
    generators: tuple
    source: str = ""
    notes: str = ""

    def generator(self, name):
        for X in self.generators:
            if X.name == name:
                return X
        raise KeyError(f"entry {self.name!r} has no generator {name!r}; have {[g.name for g in self.generators]}")

    def to_json(self):
        out = {
            "name": self.name,
            "source": self.source,
            "model": self.model.to_json(),
            "generators": [g.to_json() for g in self.generators],
        }
        if self.notes:
            out["notes"] = self.notes
        return out


KERNEL = (
    {"name": "X1", "xi_t": "1", "citation": "kernel"},
    {"name": "X2", "xi_s": "1", "citation": "kernel"},
)


def entry_from_json(obj):
    model = ModelSpec.from_json(obj["model"])
    gens = [Generator.from_json(g, model) for g in KERNEL + tuple(obj["generators"])]
    return CatalogEntry(obj["name"], model, tuple(gens), obj.get("source", ""), obj.get("notes", ""))


def load_catalog(path=None):
    if path is None:
        text = resources.files("lagsym").joinpath("data/catalog.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return [entry_from_json(e) for e in json.loads(text)["entries"]]


@lru_cache(maxsize=1)
def _cached_catalog():
    return tuple(load_catalog())


def catalog():
    return list(_cached_catalog())


def entry(name):
    for e in _cached_catalog():
        if e.name == name:
            return e
    raise KeyError(f"unknown catalog entry {name!r}")


def apply_equivalence(E, eps, m, X):
    """Push (m, X) through the finite equivalence transformation exp(eps E)."""
    from .equivalence import apply_equivalence as _apply

    return _apply(E, eps, m, X)
