"""Variational symmetries, Noether currents and their Eulerian images.

For a first-order Lagrangian L and X = xi^t d_t + xi^s d_s + eta d_phi the
defect

    R = pr1 X (L) + L (D_t xi^t + D_s xi^s)

must be a total divergence D_t V^t + D_s V^s.  The current is then

    T^i = xi^i L + zeta dL/dphi_i - V^i,     zeta = eta - xi^t phi_t - xi^s phi_s,

and satisfies D_t T^t + D_s T^s = zeta (phi_tt + G phi_ss - H) identically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
import sympy as sp

from .expr import (
    EULERIAN,
    LAGRANGIAN,
    ExprError,
    ParameterDomain,
    is_zero,
    normalize,
    numeric_zero,
    to_text,
    total_derivative,
    _realize,
)
from .model import (
    ModelSpec,
    build_lagrangian,
    euler_lagrange,
    eulerian_rates,
    on_shell,
    phi,
    phi_s,
    phi_t,
    residual,
    rho,
    s,
    t,
    u,
    x,
)
from .symmetry import Generator, prolong1, specialize


class NoetherError(ExprError):
    pass


class DivergenceSplitError(NoetherError):
    """The defect is not (recognizably) a total divergence."""

    def __init__(self, message, remainder=None, algorithm_gap=False):
        super().__init__(message)
        self.remainder = remainder
        self.algorithm_gap = algorithm_gap


class NotVariational(NoetherError):
    pass


class NoEulerianRepresentation(NoetherError):
    pass


@dataclass(frozen=True)
class DivergenceTerm:
    V_t: sp.Expr = sp.Integer(0)
    V_s: sp.Expr = sp.Integer(0)

    @property
    def strict(self):
        return self.V_t == 0 and self.V_s == 0


@dataclass(frozen=True)
class ConservedCurrent:
    density: sp.Expr
    flux: sp.Expr
    frame: str = "lagrangian"
    source: str = ""
    model: ModelSpec | None = field(default=None, compare=False)
    divergence: DivergenceTerm | None = field(default=None, compare=False)

    @property
    def ctx(self):
        return LAGRANGIAN if self.frame == "lagrangian" else EULERIAN

    def to_json(self):
        return {
            "frame": self.frame,
            "source": self.source,
            "density": to_text(self.density),
            "flux": to_text(self.flux),
        }


# ---------------------------------------------------------------------------
# defect and divergence splitting


def variational_defect(X: Generator, L, m: ModelSpec | None = None, closed=True):
    """R = pr1 X L + L (D_t xi^t + D_s xi^s), normalized.

    With a model, antiderivative symbols are replaced by closed forms where
    the family has one, so that cancellations between g and g' are visible.
    """
    L = sp.sympify(L)
    zt, zs, Dt, Ds = prolong1(X)
    R = (
        X.xi_t * sp.diff(L, t)
        + X.xi_s * sp.diff(L, s)
        + X.eta * sp.diff(L, phi)
        + zt * sp.diff(L, phi_t)
        + zs * sp.diff(L, phi_s)
        + L * (Dt["t"] + Ds["s"])
    )
    if m is not None and closed:
        R = m.expand_antiderivatives(R)
    return normalize(R)


def _phi_antiderivative(A):
    """Integral of A in phi; A must be polynomial in phi."""
    A = normalize(A)
    if not A.has(phi):
        return A * phi
    try:
        P = sp.Poly(sp.expand(A), phi)
    except sp.PolynomialError:
        return None
    if any(c.has(phi) for c in P.coeffs()):
        return None
    return P.integrate().as_expr()


def _time_antiderivative(c):
    """a(t) with a' = c by an ansatz over t^k exp(w t); None if it fails."""
    c = normalize(c)
    if c == 0:
        return sp.Integer(0)
    if not c.has(t):
        return c * t
    e = sp.expand(c.rewrite((sp.sin, sp.cos, sp.sinh, sp.cosh), sp.exp), power_exp=True)
    freqs = {sp.Integer(0)}
    for a in e.atoms(sp.exp):
        arg = sp.expand(a.args[0])
        if not arg.has(t):
            continue
        w = sp.diff(arg, t)
        if w.has(t) or sp.expand(arg - w * t).has(t):
            return None
        freqs.add(w)
    gens = [sp.exp(w * t) for w in freqs if w != 0]
    try:
        deg = sp.Poly(e, t, *gens).degree(t) if gens else sp.Poly(e, t).degree()
    except sp.PolynomialError:
        return None
    basis = [t**k * sp.exp(w * t) for w in freqs for k in range(deg + 2)]
    coeffs = sp.symbols(f"_a0:{len(basis)}")
    a = sum(ci * b for ci, b in zip(coeffs, basis))
    eq = sp.expand(sp.diff(a, t) - e, power_exp=True)
    eq = sp.powsimp(eq, combine="exp")
    try:
        P = sp.Poly(eq, t, *gens) if gens else sp.Poly(eq, t)
    except sp.PolynomialError:
        return None
    sol = sp.solve(P.coeffs(), coeffs, dict=True)
    if not sol:
        return None
    a = a.subs(sol[0]).subs({ci: 0 for ci in coeffs})
    return normalize(a)


def split_divergence(R, domain: ParameterDomain | None = None, rng=None):
    """Find (V^t, V^s) with D_t V^t + D_s V^s = R.

    The phi_t and phi_s coefficients of R are integrated in phi; the left
    over (t, s) part goes into V^t through a time-basis ansatz, falling back
    to an s-integral.  Raises DivergenceSplitError on failure.
    """
    R = normalize(R)
    if R == 0:
        return DivergenceTerm()
    if LAGRANGIAN.jet_order(R) > 1:
        raise DivergenceSplitError("defect contains second-order jets", R)
    for v1, v2 in ((phi_t, phi_t), (phi_s, phi_s), (phi_t, phi_s)):
        if normalize(sp.diff(R, v1, v2)) != 0:
            return _fail(R, f"defect is not affine in {v1}, {v2}", domain, rng)
    A = normalize(sp.diff(R, phi_t))
    B = normalize(sp.diff(R, phi_s))
    C = normalize(R - A * phi_t - B * phi_s)
    Vt = _phi_antiderivative(A)
    Vs = _phi_antiderivative(B)
    if Vt is None or Vs is None:
        return _fail(R, "phi_t or phi_s coefficient is not polynomial in phi", domain, rng)
    rest = normalize(C - sp.diff(Vt, t) - sp.diff(Vs, s))
    if rest.has(phi):
        return _fail(R, "remainder depends on phi", domain, rng, rest)
    if rest != 0:
        try:
            P = sp.Poly(sp.expand(rest), s)
            parts = [(k, c) for (k,), c in P.terms()]
        except sp.PolynomialError:
            parts = None
        if parts is None or any(c.has(s) for _, c in parts):
            Vs = Vs + sp.integrate(rest, s)
        else:
            for k, ck in parts:
                a = _time_antiderivative(ck)
                if a is not None:
                    Vt = Vt + s**k * a
                else:
                    Vs = Vs + s ** (k + 1) / (k + 1) * ck
    Vt, Vs = normalize(Vt), normalize(Vs)
    check = total_derivative(Vt, "t") + total_derivative(Vs, "s") - R
    if not is_zero(check, domain or ParameterDomain(), rng=rng):
        return _fail(R, "split does not reproduce the defect", domain, rng, normalize(check))
    return DivergenceTerm(Vt, Vs)


def _fail(R, why, domain, rng, remainder=None):
    gap = False
    try:
        gap = is_zero(euler_lagrange(R), domain or ParameterDomain(), rng=rng)
    except ExprError:
        pass
    if gap:
        why += " (Euler operator annihilates the defect: splitting algorithm gap)"
    raise DivergenceSplitError(why, remainder if remainder is not None else R, algorithm_gap=gap)


def is_divergence(R, domain=None, rng=None):
    """Euler-operator test: R is a total divergence iff E(R) = 0."""
    return is_zero(euler_lagrange(R), domain or ParameterDomain(), rng=rng)


# ---------------------------------------------------------------------------
# currents


def noether_current(X: Generator, m: ModelSpec, verify=True, rng=None) -> ConservedCurrent:
    """Lagrangian-frame conserved current of a variational symmetry."""
    X, m = specialize(X, m)
    L = build_lagrangian(m)
    R = variational_defect(X, L, m)
    try:
        V = split_divergence(R, m.domain, rng=rng)
    except DivergenceSplitError as err:
        raise NotVariational(f"{X.name} is not a variational symmetry of {m.describe()}: {err}") from err
    zeta = X.zeta()
    Tt = normalize(X.xi_t * L + zeta * sp.diff(L, phi_t) - V.V_t)
    Ts = normalize(X.xi_s * L + zeta * sp.diff(L, phi_s) - V.V_s)
    c = ConservedCurrent(Tt, Ts, "lagrangian", X.name, m, V)
    if verify and not lagrangian_divergence_vanishes(c, m, rng=rng):
        raise NoetherError(f"current of {X.name} fails the on-shell divergence check")
    return c


def lagrangian_divergence(c: ConservedCurrent):
    return total_derivative(c.density, "t") + total_derivative(c.flux, "s")


def lagrangian_divergence_vanishes(c: ConservedCurrent, m: ModelSpec, rng=None):
    div = lagrangian_divergence(c).subs(on_shell(m))
    return is_zero(m.expand_antiderivatives(div), m.domain, rng=rng)


def noether_identity_defect(c: ConservedCurrent, X: Generator, m: ModelSpec, sign=1):
    """D_t T^t + D_s T^s + sign * zeta * (phi_tt + G phi_ss - H), off-shell."""
    X, m = specialize(X, m)
    return m.expand_antiderivatives(lagrangian_divergence(c) + sign * X.zeta() * residual(m))


# ---------------------------------------------------------------------------
# Eulerian frame


_TO_EULER = {phi_s: 1 / rho, phi_t: u, phi: x}


def to_eulerian(c: ConservedCurrent) -> ConservedCurrent:
    """Density rho T^t and flux T^s + u rho T^t in (t, x, rho, u)."""
    if c.frame != "lagrangian":
        raise NoetherError("current is already Eulerian")
    Tt = sp.sympify(c.density).subs(_TO_EULER, simultaneous=True)
    Ts = sp.sympify(c.flux).subs(_TO_EULER, simultaneous=True)
    P = normalize(rho * Tt)
    Q = normalize(Ts + u * rho * Tt)
    if P.has(s) or Q.has(s):
        raise NoEulerianRepresentation(f"current of {c.source} depends explicitly on the mass coordinate s")
    return ConservedCurrent(P, Q, "eulerian", c.source, c.model)


def eulerian_divergence(P, Q):
    return total_derivative(P, "t", EULERIAN) + total_derivative(Q, "x", EULERIAN)


def verify_eulerian_divergence(c: ConservedCurrent, m: ModelSpec, rng=None):
    """D_t P + D_x Q vanishes modulo the Eulerian system."""
    div = eulerian_divergence(c.density, c.flux).subs(eulerian_rates(m))
    return is_zero(m.expand_antiderivatives(div), m.domain, rng=rng)


def is_trivial(P, Q, m: ModelSpec, rng=None):
    """Divergence vanishes identically, without using the equations."""
    return is_zero(m.expand_antiderivatives(eulerian_divergence(P, Q)), m.domain, rng=rng)


def _numeric_eval(exprs, m: ModelSpec, rng):
    """Evaluate expressions at one random point of the Eulerian jet space."""
    from .expr import _sample_point, _AntiderivativeEval, Antiderivative, _K

    exprs = [_realize(sp.sympify(e)) for e in exprs]
    syms = sorted(set().union(*(e.free_symbols for e in exprs)) | set(m.domain.symbols().values()),
                  key=lambda v: v.name)
    syms = [v for v in syms if not v.name.startswith("_k")]
    args = syms + list(_K)
    anti = sorted({type(a) for e in exprs for a in e.atoms(Antiderivative)}, key=lambda k: k.__name__)
    impls, ph = {}, {}
    for i, cls in enumerate(anti):
        ph[cls] = sp.Function(f"_anti{i}")
        impls[f"_anti{i}"] = _AntiderivativeEval(cls, args)
    exprs = [e.replace(lambda n: isinstance(n, Antiderivative), lambda n: ph[type(n)](*n.args)) for e in exprs]
    f = sp.lambdify(args, exprs, modules=[impls, "numpy"])
    vals = _sample_point(rng, syms, m.domain)
    point = [vals[a] for a in args]
    for impl in impls.values():
        impl.values = tuple(point)
    with np.errstate(all="ignore"):
        return [complex(v) for v in f(*point)]


@dataclass
class MatchResult:
    matched: bool
    scalar: sp.Rational | None
    derived: ConservedCurrent
    printed: tuple
    printed_conserved: bool
    note: str = ""


def match_current(derived: ConservedCurrent, printed, m: ModelSpec, rng=None, trials=5):
    """Compare an Eulerian current with a printed (P, Q) up to scalar and trivial current."""
    rng = rng if rng is not None else np.random.default_rng(0)
    P_d, Q_d = (m.expand_antiderivatives(e) for e in (derived.density, derived.flux))
    P_p, Q_p = (m.expand_antiderivatives(e) for e in printed)
    printed_ok = verify_eulerian_divergence(ConservedCurrent(P_p, Q_p, "eulerian"), m, rng=rng)
    ratios = []
    for _ in range(trials):
        vd, qd, vp, qp = _numeric_eval([P_d, Q_d, P_p, Q_p], m, rng)
        if abs(vp) > 1e-8:
            ratios.append(vd / vp)
        elif abs(qp) > 1e-8:
            ratios.append(qd / qp)
    if not ratios:
        return MatchResult(False, None, derived, printed, printed_ok, "printed row vanishes numerically")
    k = ratios[0]
    if abs(k.imag) > 1e-9 or abs(k) < 1e-12:
        return MatchResult(False, None, derived, printed, printed_ok, f"no real nonzero scalar (ratio {k})")
    kq = sp.nsimplify(k.real, rational=True, tolerance=1e-9)
    kq = sp.Rational(kq).limit_denominator(1000)
    trivial = is_trivial(normalize(P_d - kq * P_p), normalize(Q_d - kq * Q_p), m, rng=rng)
    note = "" if trivial else "difference after best scalar is not a trivial current"
    return MatchResult(trivial, kq, derived, printed, printed_ok, note)


# ---------------------------------------------------------------------------
# encoded table rows


@dataclass(frozen=True)
class TableRow:
    name: str
    entry: str
    generator: str
    conditions: str
    density: str
    flux: str
    citation: str
    printed_defect: str = ""
    corrected_density: str = ""
    corrected_flux: str = ""

    def parse(self, m: ModelSpec):
        return m.parse(self.density, ctx=EULERIAN), m.parse(self.flux, ctx=EULERIAN)

    def parse_corrected(self, m: ModelSpec):
        """Corrected (density, flux) for rows with a known printing defect, else None."""
        if not self.corrected_density:
            return None
        return m.parse(self.corrected_density, ctx=EULERIAN), m.parse(self.corrected_flux, ctx=EULERIAN)


def load_table(path=None):
    if path is None:
        text = resources.files("lagsym").joinpath("data/cl_euler.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return [TableRow(**r) for r in json.loads(text)["rows"]]


@lru_cache(maxsize=1)
def table_rows():
    return tuple(load_table())


@dataclass
class RowReport:
    """Outcome of re-deriving one encoded table row."""

    row: TableRow
    derived: ConservedCurrent | None
    match: MatchResult | None
    derived_conserved: bool
    corrected: MatchResult | None = None
    error: str = ""

    @property
    def ok(self):
        """Recovered, with the printed (or, for a flagged row, corrected) current conserved."""
        if self.error or self.match is None or not self.derived_conserved:
            return False
        if self.match.matched and self.match.printed_conserved:
            return True
        c = self.corrected
        return bool(self.row.printed_defect and c and c.matched and c.printed_conserved)

    @property
    def status(self):
        if not self.ok:
            return "FAIL"
        if self.match.matched and self.match.printed_conserved:
            return "match"
        return "differs-from-printed"

    def to_json(self):
        out = {"row": self.row.name, "status": self.status, "citation": self.row.citation}
        if self.error:
            out["error"] = self.error
            return out
        out["matched_printed"] = self.match.matched
        out["scalar"] = str(self.match.scalar) if self.match.matched else None
        out["printed_conserved"] = self.match.printed_conserved
        out["derived_density"] = to_text(self.derived.density)
        out["derived_flux"] = to_text(self.derived.flux)
        if self.corrected is not None:
            out["printed_defect"] = self.row.printed_defect
            out["corrected_scalar"] = str(self.corrected.scalar) if self.corrected.matched else None
            out["corrected_conserved"] = self.corrected.printed_conserved
        return out


def reproduce_row(row: TableRow, rng=None) -> RowReport:
    from .symmetry import entry

    rng = rng if rng is not None else np.random.default_rng(0)
    e = entry(row.entry)
    X = e.generator(row.generator)
    try:
        c = to_eulerian(noether_current(X, e.model, rng=rng))
    except (NoetherError, NoEulerianRepresentation) as err:
        return RowReport(row, None, None, False, error=str(err))
    _, m2 = specialize(X, e.model)
    res = match_current(c, row.parse(m2), m2, rng=rng)
    ok = verify_eulerian_divergence(c, m2, rng=rng)
    corr = None
    fixed = row.parse_corrected(m2)
    if fixed is not None:
        corr = match_current(c, fixed, m2, rng=rng)
    return RowReport(row, c, res, ok, corr)
