"""Model families, the Lagrangian, its Euler-Lagrange residual and the Eulerian form.

A model is a pair of families for G(phi_s) and H(phi) plus a parameter
domain.  Family parameters are either exact numbers or names of domain
parameters, so one ``ModelSpec`` can stand for a whole catalog row.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
import sympy as sp

from .expr import (
    EULERIAN,
    LAGRANGIAN,
    G,
    H,
    ExprError,
    JetContext,
    ParameterDomain,
    antiderivative,
    normalize,
    parse,
    to_text,
    total_derivative,
)

log = logging.getLogger(__name__)

t, s = LAGRANGIAN.base["t"], LAGRANGIAN.base["s"]
phi = LAGRANGIAN.jet("phi")
phi_t = LAGRANGIAN.jet("phi", "t")
phi_s = LAGRANGIAN.jet("phi", "s")
phi_tt = LAGRANGIAN.jet("phi", "t", "t")
phi_ts = LAGRANGIAN.jet("phi", "t", "s")
phi_ss = LAGRANGIAN.jet("phi", "s", "s")

x = EULERIAN.base["x"]
rho = EULERIAN.jet("rho")
u = EULERIAN.jet("u")
rho_t = EULERIAN.jet("rho", "t")
rho_x = EULERIAN.jet("rho", "x")
u_t = EULERIAN.jet("u", "t")
u_x = EULERIAN.jet("u", "x")

Param = Union[int, str, sp.Rational]


class ModelError(ExprError):
    pass


def _param_value(v):
    """Normalize a family parameter to an exact rational or a name."""
    if isinstance(v, sp.Basic):
        if v.is_Symbol:
            return v.name
        return sp.Rational(v)
    if isinstance(v, (int, float)):
        return sp.Rational(str(v)) if isinstance(v, float) else sp.Integer(v)
    v = str(v).strip()
    try:
        return sp.Rational(v)
    except (TypeError, ValueError):
        return v


def _is_name(v):
    return isinstance(v, str)


def _numeric(v):
    return v if not _is_name(v) else None


def _expr_field(v, var_name):
    if v is None:
        return None
    if isinstance(v, str):
        return parse(v, names={"p": LAGRANGIAN.names[var_name]})
    return sp.sympify(v)


# ---------------------------------------------------------------------------
# G families


@dataclass(frozen=True)
class ArbitraryG:
    """G given as an explicit expression in ``phi_s``, or opaque if ``expr`` is None."""

    expr: sp.Expr | None = None
    family = "arbitrary"

    def __post_init__(self):
        object.__setattr__(self, "expr", _expr_field(self.expr, "phi_s"))

    def params(self):
        return ()

    def at(self, p, val):
        if self.expr is None:
            return G(p)
        return self.expr.subs(phi_s, p)

    def to_json(self):
        out = {"family": self.family}
        if self.expr is not None:
            out["expr"] = to_text(self.expr)
        return out


@dataclass(frozen=True)
class PowerG:
    """G = -(phi_s + c)^lam."""

    lam: Param
    c: Param = 0
    family = "power"

    def __post_init__(self):
        object.__setattr__(self, "lam", _param_value(self.lam))
        object.__setattr__(self, "c", _param_value(self.c))
        if _numeric(self.lam) is not None and self.lam * (1 - self.lam) == 0:
            raise ModelError(f"power family needs lam*(1-lam) != 0, got lam={self.lam}")

    def params(self):
        return tuple(v for v in (self.lam, self.c) if _is_name(v))

    def at(self, p, val):
        return -((p + val(self.c)) ** val(self.lam))

    def to_json(self):
        return {"family": self.family, "lam": str(self.lam), "c": str(self.c)}


@dataclass(frozen=True)
class ExponentialG:
    """G = -exp(mu*phi_s)."""

    mu: Param
    family = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "mu", _param_value(self.mu))
        if _numeric(self.mu) == 0:
            raise ModelError("exponential family needs mu != 0")

    def params(self):
        return (self.mu,) if _is_name(self.mu) else ()

    def at(self, p, val):
        return -sp.exp(val(self.mu) * p)

    def to_json(self):
        return {"family": self.family, "mu": str(self.mu)}


# ---------------------------------------------------------------------------
# H families


@dataclass(frozen=True)
class ZeroH:
    family = "zero"

    def params(self):
        return ()

    def at(self, q, val):
        return sp.Integer(0)

    def to_json(self):
        return {"family": self.family}


@dataclass(frozen=True)
class LinearH:
    """H = alpha*phi.  An additive constant is removable by equivalence and is dropped."""

    alpha: Param
    beta: Param = 0
    family = "linear"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _param_value(self.alpha))
        beta = _param_value(self.beta)
        if beta != 0:
            log.warning("dropping constant term %s of H = alpha*phi + beta (equivalent to beta = 0)", beta)
        object.__setattr__(self, "beta", sp.Integer(0))
        if _numeric(self.alpha) == 0:
            raise ModelError("linear H needs alpha != 0")

    def params(self):
        return (self.alpha,) if _is_name(self.alpha) else ()

    def at(self, q, val):
        return val(self.alpha) * q

    def to_json(self):
        return {"family": self.family, "alpha": str(self.alpha)}


@dataclass(frozen=True)
class PowerLawH:
    """H = beta*phi^alpha."""

    alpha: Param
    beta: Param
    family = "powerlaw"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _param_value(self.alpha))
        object.__setattr__(self, "beta", _param_value(self.beta))
        if _numeric(self.alpha) in (0, 1):
            raise ModelError(f"power-law H needs alpha != 0, 1, got {self.alpha}")
        if _numeric(self.beta) == 0:
            raise ModelError("power-law H needs beta != 0")

    def params(self):
        return tuple(v for v in (self.alpha, self.beta) if _is_name(v))

    def at(self, q, val):
        return val(self.beta) * q ** val(self.alpha)

    def to_json(self):
        return {"family": self.family, "alpha": str(self.alpha), "beta": str(self.beta)}


@dataclass(frozen=True)
class ExponentialH:
    """H = exp(alpha*phi)."""

    alpha: Param
    family = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _param_value(self.alpha))
        if _numeric(self.alpha) == 0:
            raise ModelError("exponential H needs alpha != 0")

    def params(self):
        return (self.alpha,) if _is_name(self.alpha) else ()

    def at(self, q, val):
        return sp.exp(val(self.alpha) * q)

    def to_json(self):
        return {"family": self.family, "alpha": str(self.alpha)}


@dataclass(frozen=True)
class CubicPlusLinearH:
    """H = beta*phi^-3 + alpha*phi."""

    alpha: Param
    beta: Param
    family = "cubic"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _param_value(self.alpha))
        object.__setattr__(self, "beta", _param_value(self.beta))
        if _numeric(self.alpha) == 0:
            raise ModelError("H = beta*phi^-3 + alpha*phi needs alpha != 0")

    def params(self):
        return tuple(v for v in (self.alpha, self.beta) if _is_name(v))

    def at(self, q, val):
        return val(self.beta) * q**-3 + val(self.alpha) * q

    def to_json(self):
        return {"family": self.family, "alpha": str(self.alpha), "beta": str(self.beta)}


@dataclass(frozen=True)
class ArbitraryH:
    """H given as an explicit expression in ``phi``, or opaque if ``expr`` is None."""

    expr: sp.Expr | None = None
    family = "arbitrary"

    def __post_init__(self):
        object.__setattr__(self, "expr", _expr_field(self.expr, "phi"))

    def params(self):
        return ()

    def at(self, q, val):
        if self.expr is None:
            return H(q)
        return self.expr.subs(phi, q)

    def to_json(self):
        out = {"family": self.family}
        if self.expr is not None:
            out["expr"] = to_text(self.expr)
        return out


G_FAMILIES = {c.family: c for c in (ArbitraryG, PowerG, ExponentialG)}
H_FAMILIES = {c.family: c for c in (ZeroH, LinearH, PowerLawH, ExponentialH, CubicPlusLinearH, ArbitraryH)}


def _family_from_json(table, obj, kind):
    obj = dict(obj)
    name = obj.pop("family", None)
    if name not in table:
        raise ModelError(f"unknown {kind} family {name!r}; expected one of {sorted(table)}")
    try:
        return table[name](**obj)
    except TypeError as err:
        raise ModelError(f"bad fields for {kind} family {name!r}: {err}") from err


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ModelSpec:
    g: object
    h: object = field(default_factory=ZeroH)
    domain: ParameterDomain = field(default_factory=ParameterDomain)

    def __post_init__(self):
        if isinstance(self.domain, dict):
            object.__setattr__(self, "domain", ParameterDomain.from_json(self.domain))
        missing = [p for p in self.g.params() + self.h.params() if p not in self.domain]
        if missing:
            raise ModelError(f"parameters {missing} are not declared in the domain")
        for fam in (self.g, self.h):
            for name in fam.params():
                pass

    # parameter access
    def value(self, v):
        if _is_name(v):
            return self.domain.symbol(v)
        return sp.sympify(v)

    def G(self, p=phi_s):
        return self.g.at(p, self.value)

    def H(self, q=phi):
        return self.h.at(q, self.value)

    @property
    def has_h(self):
        return not isinstance(self.h, ZeroH)

    @property
    def symbols(self):
        return self.domain.symbols()

    def specialize(self, bindings):
        """Fix some parameters to numbers; returns a new model."""
        bindings = {k: sp.Rational(v) for k, v in bindings.items()}

        def fix(fam):
            changes = {}
            for f in ("lam", "c", "mu", "alpha", "beta"):
                if hasattr(fam, f) and getattr(fam, f) in bindings:
                    changes[f] = bindings[getattr(fam, f)]
            for f in ("expr",):
                if getattr(fam, f, None) is not None:
                    subs = {self.domain.symbol(k): v for k, v in bindings.items() if k in self.domain}
                    changes[f] = getattr(fam, f).subs(subs)
            return replace(fam, **changes) if changes else fam

        return ModelSpec(fix(self.g), fix(self.h), self.domain.without(bindings))

    def bind(self, e, bindings):
        """Apply the same parameter specialization to an expression."""
        subs = {self.domain.symbol(k): sp.Rational(v) for k, v in bindings.items() if k in self.domain}
        return sp.sympify(e).subs(subs)

    # antiderivatives
    @property
    def gp(self):
        return _antiderivatives(self)[1]

    @property
    def gfun(self):
        return _antiderivatives(self)[0]

    @property
    def hfun(self):
        return _antiderivatives(self)[2]

    def names(self):
        """Function names available to the text grammar for this model."""
        return {"g": self.gfun, "gp": self.gp, "h": self.hfun, **self.domain.symbols()}

    def parse(self, text, ctx=LAGRANGIAN):
        return parse(text, names=self.names(), ctx=ctx, domain=self.domain)

    def expand_antiderivatives(self, e):
        """Replace g, gp, h by closed forms where the family has one."""
        closed = _closed_forms(self)
        e = sp.sympify(e)
        for cls, form in closed.items():
            if form is not None and e.has(cls):
                e = e.replace(cls, form)
        return e

    # serialization
    def to_json(self):
        return {"g": self.g.to_json(), "h": self.h.to_json(), "domain": self.domain.to_json()}

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "g" not in obj:
            raise ModelError("model JSON needs at least a 'g' object")
        g = _family_from_json(G_FAMILIES, obj["g"], "G")
        h = _family_from_json(H_FAMILIES, obj.get("h", {"family": "zero"}), "H")
        return cls(g, h, ParameterDomain.from_json(obj.get("domain", {})))

    def describe(self):
        return f"G = {to_text(self.G())}, H = {to_text(self.H())}"


@functools.lru_cache(maxsize=None)
def _antiderivatives(m: ModelSpec):
    Gf = sp.Lambda(phi_s, m.G(phi_s)) if not _opaque_g(m) else G
    Hf = sp.Lambda(phi, m.H(phi)) if not _opaque_h(m) else H
    gp = antiderivative("gp", Gf, depth=1)
    g = antiderivative("g", Gf, depth=2, derivative=gp)
    h = antiderivative("h", Hf, depth=1)
    return g, gp, h


def _opaque_g(m):
    return isinstance(m.g, ArbitraryG) and m.g.expr is None


def _opaque_h(m):
    return isinstance(m.h, ArbitraryH) and m.h.expr is None


@functools.lru_cache(maxsize=None)
def _closed_forms(m: ModelSpec):
    g, gp, h = _antiderivatives(m)
    val = m.value
    P = sp.Dummy("p", positive=True)
    forms = {g: None, gp: None, h: None}
    fam = m.g
    if isinstance(fam, PowerG):
        lam, c = val(fam.lam), val(fam.c)
        b = P + c
        if lam == -1:
            forms[gp] = sp.Lambda(P, -sp.log(b))
            forms[g] = sp.Lambda(P, -(b * sp.log(b) - b))
        elif lam == -2:
            forms[gp] = sp.Lambda(P, 1 / b)
            forms[g] = sp.Lambda(P, sp.log(b))
        else:
            forms[gp] = sp.Lambda(P, -(b ** (lam + 1)) / (lam + 1))
            forms[g] = sp.Lambda(P, -(b ** (lam + 2)) / ((lam + 1) * (lam + 2)))
    elif isinstance(fam, ExponentialG):
        mu = val(fam.mu)
        forms[gp] = sp.Lambda(P, -sp.exp(mu * P) / mu)
        forms[g] = sp.Lambda(P, -sp.exp(mu * P) / mu**2)
    Q = sp.Dummy("q", positive=True)
    hf = m.h
    if isinstance(hf, ZeroH):
        forms[h] = sp.Lambda(Q, sp.Integer(0))
    elif isinstance(hf, LinearH):
        forms[h] = sp.Lambda(Q, val(hf.alpha) * Q**2 / 2)
    elif isinstance(hf, PowerLawH):
        a, b = val(hf.alpha), val(hf.beta)
        forms[h] = sp.Lambda(Q, b * sp.log(Q) if a == -1 else b * Q ** (a + 1) / (a + 1))
    elif isinstance(hf, ExponentialH):
        a = val(hf.alpha)
        forms[h] = sp.Lambda(Q, sp.exp(a * Q) / a)
    elif isinstance(hf, CubicPlusLinearH):
        a, b = val(hf.alpha), val(hf.beta)
        forms[h] = sp.Lambda(Q, -b * Q**-2 / 2 + a * Q**2 / 2)
    return forms


# ---------------------------------------------------------------------------
# operations


def build_lagrangian(m: ModelSpec):
    """L = phi_t^2/2 + g(phi_s) + h(phi), with the h term omitted when H = 0."""
    L = phi_t**2 / 2 + m.gfun(phi_s)
    if m.has_h:
        L += m.hfun(phi)
    return L


def euler_lagrange(L, ctx: JetContext = LAGRANGIAN):
    """Residual D_t L_{phi_t} + D_s L_{phi_s} - L_phi (sign of phi_tt + G phi_ss - H)."""
    L = sp.sympify(L)
    if ctx.jet_order(L) > 1:
        raise ModelError("Euler-Lagrange operator needs a first-order Lagrangian")
    (dep,) = ctx.dependents
    out = -sp.diff(L, ctx.jet(dep))
    for d in ctx.independents:
        out += total_derivative(sp.diff(L, ctx.jet(dep, d)), d, ctx)
    return normalize(out)


def residual(m: ModelSpec):
    """phi_tt + G(phi_s) phi_ss - H(phi)."""
    return phi_tt + m.G() * phi_ss - m.H()


def on_shell(m: ModelSpec):
    """Substitution solving the equation for phi_tt."""
    return {phi_tt: m.H() - m.G() * phi_ss}


def eulerian_system(m: ModelSpec):
    """Residuals of the continuity and momentum equations in (t, x)."""
    r1 = rho_t + u * rho_x + rho * u_x
    r2 = u_t + u * u_x - m.G(1 / rho) * rho**-3 * rho_x - m.H(x)
    return normalize(r1), normalize(r2)


def eulerian_rates(m: ModelSpec):
    """rho_t and u_t solved from the Eulerian system."""
    return {
        rho_t: -(u * rho_x + rho * u_x),
        u_t: -u * u_x + m.G(1 / rho) * rho**-3 * rho_x + m.H(x),
    }


def check_hyperbolic(m: ModelSpec, samples=200, rng=None, lo=0.05, hi=5.0):
    """Sample phi_s on the default domain and confirm G < 0 there."""
    rng = rng if rng is not None else np.random.default_rng(0)
    Gx = m.G()
    if Gx.has(G):
        raise ModelError("hyperbolicity of an opaque G cannot be sampled")
    args = [phi_s] + list(m.domain.symbols().values())
    f = sp.lambdify(args, Gx, modules="numpy")
    bad = []
    for _ in range(samples):
        p = rng.uniform(lo, hi)
        vals = m.domain.sample(rng)
        point = [p] + [vals[a] for a in args[1:]]
        with np.errstate(all="ignore"):
            v = complex(f(*point))
        if not np.isfinite(v):
            continue
        if not (abs(v.imag) < 1e-12 and v.real < 0):
            bad.append((p, v))
    return not bad, bad
