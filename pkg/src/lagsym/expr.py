"""Symbolic kernel on jet spaces.

Expressions are plain sympy trees.  This module fixes the jet variables,
the text grammar, partial and total derivatives, a bounded normal form and
the two-route zero test used by every verification in the package.

Normal form
-----------
``normalize`` rewrites sin/cos/sinh/cosh into exponentials, expands, puts
the result over a common denominator, merges exponentials term by term and
finally folds ``exp(i*theta)`` back into ``cos``/``sin``.  The exponential
detour is what makes the Pythagorean and double-angle identities come out
structurally; nothing else is attempted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np
import sympy as sp
from scipy import integrate
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    rationalize,
    standard_transformations,
)

Expression = sp.Expr

__all__ = [
    "Expression",
    "JetContext",
    "LAGRANGIAN",
    "EULERIAN",
    "ParamConstraint",
    "ParameterDomain",
    "Antiderivative",
    "antiderivative",
    "G",
    "H",
    "partial_derivative",
    "total_derivative",
    "substitute",
    "normalize",
    "is_zero",
    "parse",
    "to_text",
    "ExprError",
    "UnknownSymbolError",
    "JetOrderError",
    "SimplifierGap",
    "SamplingError",
]


class ExprError(ValueError):
    pass


class UnknownSymbolError(ExprError):
    def __init__(self, name):
        super().__init__(f"unknown symbol {name!r}")
        self.name = name


class JetOrderError(ExprError):
    pass


class SimplifierGap(ExprError):
    """Structural and numeric zero tests disagree."""

    def __init__(self, expr, structural, numeric):
        verdicts = f"structural={structural}, numeric={numeric}"
        super().__init__(f"zero-test disagreement ({verdicts}) for {to_text(expr)}")
        self.expr = expr
        self.structural = structural
        self.numeric = numeric


class SamplingError(ExprError):
    pass


# ---------------------------------------------------------------------------
# jet spaces


class JetContext:
    """Independent variables, dependent variables and the maximal jet order.

    Jet symbols are named ``<dep>_<letters>`` with the letters sorted in the
    order the independent variables were declared, e.g. ``phi_ts``.
    """

    def __init__(self, independents, dependents, order, positive=()):
        self.independents = tuple(independents)
        self.dependents = tuple(dependents)
        self.order = order
        self.base = {n: sp.Symbol(n, real=True) for n in self.independents}
        self._jets = {}
        self._order_of = {}
        for dep in self.dependents:
            for k in range(order + 1):
                for idx in _multi_indices(len(self.independents), k):
                    name = dep if k == 0 else dep + "_" + "".join(
                        self.independents[i] for i in idx
                    )
                    assumptions = {"positive": True} if name in positive else {"real": True}
                    sym = sp.Symbol(name, **assumptions)
                    self._jets[(dep, idx)] = sym
                    self._order_of[sym] = k

    def jet(self, dep, *dirs):
        idx = tuple(sorted(self.independents.index(d) for d in dirs))
        if len(idx) > self.order:
            raise JetOrderError(f"jet order {len(idx)} exceeds declared order {self.order}")
        return self._jets[(dep, idx)]

    @property
    def jet_symbols(self):
        return tuple(self._jets.values())

    @property
    def names(self):
        out = {sym.name: sym for sym in self._jets.values()}
        out.update(self.base)
        return out

    def order_of(self, sym):
        return self._order_of.get(sym, 0)

    def jet_order(self, e):
        orders = [self._order_of[x] for x in sp.sympify(e).free_symbols if x in self._order_of]
        return max(orders, default=0)

    def _index(self, sym):
        for key, val in self._jets.items():
            if val == sym:
                return key
        raise KeyError(sym)

    def __repr__(self):
        return f"JetContext({self.independents}, {self.dependents}, order={self.order})"


def _multi_indices(n, k):
    if k == 0:
        return [()]
    out = []
    for idx in _multi_indices(n, k - 1):
        start = idx[-1] if idx else 0
        for i in range(start, n):
            out.append(idx + (i,))
    return out


LAGRANGIAN = JetContext(("t", "s"), ("phi",), 2, positive=("phi_s",))
EULERIAN = JetContext(("t", "x"), ("rho", "u"), 1, positive=("rho",))


# ---------------------------------------------------------------------------
# parameters


_SIGNS = ("real", "nonzero", "positive", "negative")


@dataclass(frozen=True)
class ParamConstraint:
    sign: str = "real"
    exclude: tuple = ()

    def __post_init__(self):
        if self.sign not in _SIGNS:
            raise ExprError(f"unknown sign tag {self.sign!r}")
        object.__setattr__(self, "exclude", tuple(sp.Rational(v) for v in self.exclude))

    def admits(self, value):
        v = sp.sympify(value)
        if not v.is_number:
            return True
        if v in self.exclude:
            return False
        if self.sign == "positive":
            return bool(v > 0)
        if self.sign == "negative":
            return bool(v < 0)
        if self.sign == "nonzero":
            return v != 0
        return True

    def to_json(self):
        if not self.exclude:
            return self.sign
        return {"sign": self.sign, "exclude": [str(v) for v in self.exclude]}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj.get("sign", "real"), tuple(obj.get("exclude", ())))


def _param_symbol(name, sign):
    if sign == "positive":
        return sp.Symbol(name, positive=True)
    if sign == "negative":
        return sp.Symbol(name, negative=True)
    if sign == "nonzero":
        return sp.Symbol(name, real=True, nonzero=True)
    return sp.Symbol(name, real=True)


class ParameterDomain(Mapping):
    """Sign and exclusion constraints on the free parameters of a model.

    The sign tag is baked into the sympy assumptions of the parameter symbol,
    so ``Abs(alpha)`` collapses to ``-alpha`` for a negative-tagged alpha.
    """

    def __init__(self, constraints=None):
        items = dict(constraints or {})
        self._c = {
            k: (v if isinstance(v, ParamConstraint) else ParamConstraint.from_json(v))
            for k, v in items.items()
        }

    def __getitem__(self, name):
        return self._c[name]

    def __iter__(self):
        return iter(sorted(self._c))

    def __len__(self):
        return len(self._c)

    def __eq__(self, other):
        return isinstance(other, ParameterDomain) and self._c == other._c

    def __hash__(self):
        return hash(tuple(sorted(self._c.items(), key=lambda kv: kv[0])))

    def __repr__(self):
        return f"ParameterDomain({self.to_json()})"

    def symbol(self, name):
        return _param_symbol(name, self._c[name].sign)

    def symbols(self):
        return {name: self.symbol(name) for name in self}

    def merged(self, other):
        out = dict(self._c)
        for name, con in other._c.items():
            if name in out and out[name].sign != con.sign:
                raise ExprError(f"conflicting sign tags for parameter {name!r}")
            if name in out:
                con = ParamConstraint(con.sign, tuple(set(out[name].exclude) | set(con.exclude)))
            out[name] = con
        return ParameterDomain(out)

    def without(self, names):
        return ParameterDomain({k: v for k, v in self._c.items() if k not in set(names)})

    def admits(self, values):
        return all(self._c[k].admits(v) for k, v in values.items() if k in self._c)

    def sample(self, rng, lo=0.3, hi=2.5):
        """Draw one float value per parameter, away from excluded points."""
        out = {}
        for name in self:
            con = self._c[name]
            for _ in range(100):
                mag = rng.uniform(lo, hi)
                if con.sign == "positive":
                    v = mag
                elif con.sign == "negative":
                    v = -mag
                else:
                    v = mag if rng.random() < 0.5 else -mag
                if all(abs(v - float(x)) > 0.05 for x in con.exclude):
                    break
            out[self.symbol(name)] = v
        return out

    def to_json(self):
        return {k: self._c[k].to_json() for k in self}

    @classmethod
    def from_json(cls, obj):
        return cls({k: ParamConstraint.from_json(v) for k, v in (obj or {}).items()})


# ---------------------------------------------------------------------------
# opaque and antiderivative functions


G = sp.Function("G", real=True)
H = sp.Function("H", real=True)


class Antiderivative(sp.Function):
    """Base for function symbols linked to a known derivative.

    Subclasses set ``_derivative`` (a one-argument callable returning the
    derivative expression), ``_base`` (the expression integrated) and
    ``_depth`` (how many integrations separate the symbol from ``_base``).
    """

    nargs = 1
    is_real = True
    _derivative: Callable = None
    _base: Callable = None
    _depth = 1

    def fdiff(self, argindex=1):
        if argindex != 1:
            raise sp.ArgumentIndexError(self, argindex)
        return self._derivative(self.args[0])


def antiderivative(name, base, depth=1, derivative=None):
    """Create a function class ``F`` with ``F^(depth) = base``.

    ``derivative`` is the class (or callable) returned by ``F'`` when
    ``depth > 1``; it defaults to ``base`` for ``depth == 1``.
    """
    deriv = derivative if derivative is not None else base
    return type(
        name,
        (Antiderivative,),
        {
            "_derivative": staticmethod(deriv),
            "_base": staticmethod(base),
            "_depth": depth,
        },
    )


# ---------------------------------------------------------------------------
# derivatives and substitution


_KNOWN_PARAMETER_NAMES = {
    "alpha", "beta", "lam", "mu", "c", "gamma1", "gamma2", "eps", "kappa", "delta",
}


def _resolve(v, ctx):
    if isinstance(v, sp.Symbol):
        return v
    if isinstance(v, str):
        names = ctx.names
        if v in names:
            return names[v]
        if v in _KNOWN_PARAMETER_NAMES:
            return sp.Symbol(v, real=True)
        raise UnknownSymbolError(v)
    raise UnknownSymbolError(str(v))


def partial_derivative(e, v, ctx=LAGRANGIAN, normal=True):
    """Partial derivative treating every other symbol as independent."""
    sym = _resolve(v, ctx)
    d = sp.diff(sp.sympify(e), sym)
    return normalize(d) if normal else d


def total_derivative(e, direction, ctx=LAGRANGIAN):
    """Total derivative ``D_direction`` on the jet space of ``ctx``.

    ``e`` must stay below the declared order so the result is representable.
    """
    e = sp.sympify(e)
    if direction not in ctx.independents:
        raise UnknownSymbolError(direction)
    if ctx.jet_order(e) >= ctx.order:
        raise JetOrderError(
            f"D_{direction} of an order-{ctx.jet_order(e)} expression leaves the order-{ctx.order} jet space"
        )
    out = sp.diff(e, ctx.base[direction])
    for sym in e.free_symbols:
        if sym not in ctx._order_of:
            continue
        dep, idx = ctx._index(sym)
        dirs = [ctx.independents[i] for i in idx] + [direction]
        out += ctx.jet(dep, *dirs) * sp.diff(e, sym)
    return out


def substitute(e, bindings, normal=True):
    """Simultaneous substitution followed by normalization."""
    e = sp.sympify(e)
    b = {(_resolve(k, LAGRANGIAN) if isinstance(k, str) else k): sp.sympify(v)
         for k, v in bindings.items()}
    out = e.subs(b, simultaneous=True)
    return normalize(out) if normal else out


# ---------------------------------------------------------------------------
# normal form


_TRIG = (sp.sin, sp.cos, sp.tan, sp.sinh, sp.cosh, sp.tanh)


def _canon_poly(e):
    e = sp.expand(e)
    e = sp.powsimp(e, combine="exp")
    return sp.expand(e, power_exp=False)


def _split_imag(arg):
    re_part, im_part = [], []
    for term in sp.Add.make_args(arg):
        coeff, rest = term.as_coeff_Mul()
        if rest.has(sp.I) or coeff.has(sp.I):
            im_part.append(sp.expand(term / sp.I))
        else:
            re_part.append(term)
    return sp.Add(*re_part), sp.Add(*im_part)


def _fold_exp(e):
    def repl(node):
        re_part, im_part = _split_imag(node.args[0])
        if im_part == 0:
            return node
        return sp.exp(re_part) * (sp.cos(im_part) + sp.I * sp.sin(im_part))

    if not e.has(sp.exp):
        return e
    folded = e.replace(lambda n: isinstance(n, sp.exp) and n.args[0].has(sp.I), repl)
    return sp.expand(folded, power_exp=False)


def normalize(e):
    """Bounded normal form; see the module docstring."""
    e = sp.sympify(e)
    if e.is_Number:
        return e
    if e.has(*_TRIG):
        e = e.rewrite(_TRIG, sp.exp)
    e = sp.expand(e)
    num, den = sp.fraction(sp.together(e))
    num = _canon_poly(num)
    if num == 0:
        return sp.Integer(0)
    den = _canon_poly(den)
    # a monomial denominator's exponential factors move to the numerator,
    # so exp(i t) denominators fold to real trig form
    if len(sp.Add.make_args(den)) == 1:
        exps = [f for f in sp.Mul.make_args(den) if isinstance(f, sp.exp)]
        if exps:
            shift = sp.Add(*[f.args[0] for f in exps])
            num = _canon_poly(num * sp.exp(-shift))
            den = sp.Mul(*[f for f in sp.Mul.make_args(den) if not isinstance(f, sp.exp)])
    num, den = _fold_exp(num), _fold_exp(den)
    if den == 1:
        return num
    try:
        return sp.cancel(num / den)
    except sp.PolynomialError:
        return num / den


# ---------------------------------------------------------------------------
# numeric route


# Generic realizations of the opaque arbitrary elements; coefficients are
# redrawn per sample point.
_K = sp.symbols("_k0:9", real=True)
_P = sp.Dummy("p")


def _g_template(p):
    return -(_K[0] + _K[1] * p**2 + _K[2] * sp.exp(_K[3] * p))


def _h_template(q):
    return _K[4] + _K[5] * q + _K[6] * q**3 + _K[7] * sp.sin(_K[8] * q)


_DEFAULT_JET_RANGES = {
    "t": (0.1, 1.5),
    "s": (0.1, 1.5),
    "x": (0.5, 2.0),
    "phi": (0.5, 2.0),
    "phi_s": (0.8, 2.2),
    "rho": (0.5, 2.0),
}


def _realize(e):
    """Replace opaque G, H by random-coefficient templates."""
    out = e
    if out.has(G):
        out = out.replace(G, sp.Lambda(_P, _g_template(_P)))
    if out.has(H):
        out = out.replace(H, sp.Lambda(_P, _h_template(_P)))
    if out.has(sp.Derivative, sp.Subs):
        out = out.doit()
    return out


class _AntiderivativeEval:
    """Quadrature evaluation of an antiderivative class at one sample point."""

    def __init__(self, cls, args):
        base = _realize(sp.sympify(cls._base(_P)))
        self.depth = cls._depth
        self._f = sp.lambdify([_P] + list(args), base, modules="numpy")
        self.values = ()

    def __call__(self, p):
        p = float(np.real(p))
        n = self.depth

        def integrand(q):
            return (p - q) ** (n - 1) / math.factorial(n - 1) * float(self._f(q, *self.values))

        val, _ = integrate.quad(integrand, 1.0, p, limit=200, epsabs=1e-14, epsrel=1e-13)
        return val


def _numeric_args(e, domain):
    jets = sorted((x for x in e.free_symbols if not x.name.startswith("_k")), key=lambda x: x.name)
    params = domain.symbols()
    return jets, params


def _sample_point(rng, syms, domain):
    vals = {}
    pvals = domain.sample(rng)
    for sym in syms:
        if sym in pvals:
            vals[sym] = pvals[sym]
            continue
        name = sym.name
        lo, hi = _DEFAULT_JET_RANGES.get(name, (-1.0, 1.0))
        vals[sym] = rng.uniform(lo, hi)
    for k in range(len(_K)):
        vals[_K[k]] = rng.uniform(0.5, 1.5)
    return vals


def numeric_zero(e, domain=None, samples=100, rng=None, rtol=1e-10):
    """Evaluate ``e`` at random points of ``domain``; True if it vanishes."""
    domain = domain or ParameterDomain()
    rng = rng if rng is not None else np.random.default_rng(0)
    e = _realize(sp.sympify(e))
    anti = sorted({type(a) for a in e.atoms(Antiderivative)}, key=lambda c: c.__name__)
    jets, _ = _numeric_args(e, domain)
    all_syms = sorted(set(jets) | set(domain.symbols().values()), key=lambda x: x.name)
    args = list(all_syms) + list(_K)
    placeholders, impls = {}, {}
    for i, cls in enumerate(anti):
        ph = sp.Function(f"_anti{i}")
        placeholders[cls] = ph
        impls[f"_anti{i}"] = _AntiderivativeEval(cls, args)
    if placeholders:
        e = e.replace(
            lambda n: isinstance(n, Antiderivative),
            lambda n: placeholders[type(n)](*n.args),
        )
    terms = sp.Add.make_args(sp.expand(e, power_exp=False, log=False))
    f = sp.lambdify(args, list(terms), modules=[impls, "numpy"])
    good = bad = 0
    with np.errstate(all="ignore"):
        while good < samples:
            vals = _sample_point(rng, all_syms, domain)
            point = [vals[a] for a in args]
            for impl in impls.values():
                impl.values = tuple(point)
            try:
                parts = np.asarray(f(*point), dtype=complex)
            except (ZeroDivisionError, ValueError, OverflowError):
                parts = np.array([np.nan])
            if parts.size and not np.all(np.isfinite(parts)):
                bad += 1
                if bad > max(samples, 20) and bad > good:
                    raise SamplingError(
                        f"more than half of the sample points hit poles or branches for {to_text(e)}"
                    )
                continue
            good += 1
            total = parts.sum()
            scale = float(np.max(np.abs(parts))) if parts.size else 0.0
            if abs(total) > rtol * (1.0 + scale):
                return False
    return True


def is_zero(e, domain=None, samples=100, rng=None):
    """Two-route zero test; raises ``SimplifierGap`` if the routes disagree."""
    e = sp.sympify(e)
    structural = normalize(e) == 0
    numeric = numeric_zero(e, domain, samples=samples, rng=rng)
    if structural != numeric:
        raise SimplifierGap(e, structural, numeric)
    return structural


# ---------------------------------------------------------------------------
# text grammar


_FUNCS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "tanh": sp.tanh,
    "exp": sp.exp,
    "ln": sp.log,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "abs": sp.Abs,
    "Abs": sp.Abs,
    "pi": sp.pi,
}

_TRANSFORMS = standard_transformations + (convert_xor, rationalize)


def parse(text, names=None, ctx=LAGRANGIAN, domain=None):
    """Parse the infix grammar (``^`` for powers, ``phi_s`` jet names).

    ``names`` maps extra identifiers (function classes such as ``g``) to
    sympy objects; parameters come from ``domain``.  Any identifier outside
    these tables is an error.
    """
    table = dict(_FUNCS)
    table.update(ctx.names)
    table.update({"G": G, "H": H})
    if domain is not None:
        table.update(domain.symbols())
    if names:
        table.update(names)
    try:
        e = parse_expr(str(text), local_dict=table, transformations=_TRANSFORMS)
    except (SyntaxError, TypeError, sp.SympifyError) as err:
        raise ExprError(f"cannot parse {text!r}: {err}") from err
    allowed = set(table.values())
    for sym in e.free_symbols:
        if sym not in allowed:
            raise UnknownSymbolError(sym.name)
    for fn in e.atoms(sp.core.function.AppliedUndef):
        if type(fn) not in allowed and fn.func not in allowed:
            raise UnknownSymbolError(str(fn.func))
    return e


def to_text(e):
    """Inverse of ``parse`` up to normalization."""
    text = sp.sstr(sp.sympify(e), order="lex")
    return text.replace("**", "^").replace("Abs(", "abs(").replace("log(", "ln(")


def rational(value):
    """Exact rational from a float, string or int."""
    if isinstance(value, float):
        return sp.Rational(Fraction(value).limit_denominator(10**6))
    return sp.Rational(value)
