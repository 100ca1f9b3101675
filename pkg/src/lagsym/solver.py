"""Explicit integration of phi_tt + G(phi_s) phi_ss - H(phi) = 0 on a mass-coordinate grid.

The default spatial operator is the conservative flux form

    a_i = H(phi_i) - (g'(D+ phi_i) - g'(D- phi_i)) / ds,

which equals the three-point central form H - G(phi_s) phi_ss up to O(ds^2)
and makes the sum of a_i telescope exactly on a periodic grid.  The plain
central form is available as ``scheme="central"``.

Periodic grids are affine-periodic: phi_{i+N} = phi_i + J(t), where the
stretch J obeys J'' = H(J) - H(0).  This needs an affine H.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import sympy as sp

from .expr import LAGRANGIAN, ExprError, normalize
from .model import (
    ArbitraryG,
    ArbitraryH,
    LinearH,
    ModelSpec,
    ZeroH,
    phi,
    phi_s,
    phi_t,
    s,
    t,
)


class SolverError(RuntimeError):
    pass


class PositivityError(SolverError):
    def __init__(self, index, value, time):
        super().__init__(f"loss of hyperbolicity/positivity: phi_s = {value:.3e} at index {index}, t = {time:.6g}")
        self.index = index
        self.value = value
        self.time = time


@dataclass(frozen=True)
class Grid:
    N: int
    S: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.N < 8:
            raise SolverError("grid needs N >= 8")
        if self.S <= 0:
            raise SolverError("grid length must be positive")
        if self.boundary not in ("periodic", "fixed"):
            raise SolverError(f"unknown boundary {self.boundary!r}")

    @property
    def ds(self):
        return self.S / self.N

    @property
    def nodes(self):
        n = self.N if self.boundary == "periodic" else self.N + 1
        return np.arange(n) * self.ds

    @property
    def midpoints(self):
        return (np.arange(self.N) + 0.5) * self.ds


@dataclass
class SolverState:
    phi: np.ndarray
    phi_t: np.ndarray
    t: float = 0.0
    step: int = 0
    J: float = 0.0
    J_t: float = 0.0

    def copy(self):
        return SolverState(self.phi.copy(), self.phi_t.copy(), self.t, self.step, self.J, self.J_t)


# ---------------------------------------------------------------------------
# numeric model


@dataclass
class NumericModel:
    G: Callable
    gp: Callable | None
    H: Callable
    H_affine: tuple | None  # (H(0), slope) when H is affine
    model: ModelSpec


def _lambdify1(var, e):
    f = sp.lambdify(var, e, modules="numpy")

    def call(a):
        return np.broadcast_to(np.asarray(f(a), dtype=float), np.shape(a)).astype(float)

    return call


def numeric_model(m: ModelSpec) -> NumericModel:
    """Vectorized G, g', H for a model with every parameter fixed."""
    if len(m.domain):
        raise SolverError(f"solver needs numeric parameters; free: {list(m.domain)}")
    p, q = sp.Dummy("p"), sp.Dummy("q")
    Gx = m.G(p)
    Hx = m.H(q)
    if Gx.has(sp.Function) and isinstance(m.g, ArbitraryG) and m.g.expr is None:
        raise SolverError("solver needs an explicit G")
    if isinstance(m.h, ArbitraryH) and m.h.expr is None:
        raise SolverError("solver needs an explicit H")
    gp_expr = m.expand_antiderivatives(m.gp(p))
    if gp_expr.has(m.gp):
        gp_expr = sp.integrate(Gx, p)
        if gp_expr.has(sp.Integral):
            gp_expr = None
    affine = None
    if normalize(sp.diff(Hx, q, 2)) == 0:
        affine = (float(Hx.subs(q, 0)), float(sp.diff(Hx, q)))
    return NumericModel(
        _lambdify1(p, Gx),
        _lambdify1(p, gp_expr) if gp_expr is not None else None,
        _lambdify1(q, Hx),
        affine,
        m,
    )


# ---------------------------------------------------------------------------
# spatial operators


def _extended(st: SolverState, grid: Grid):
    """phi with one ghost node on each side (periodic) or the nodes as is (fixed)."""
    if grid.boundary == "periodic":
        return np.concatenate(([st.phi[-1] - st.J], st.phi, [st.phi[0] + st.J]))
    return st.phi


def forward_strain(st: SolverState, grid: Grid):
    """D+ phi on each cell (length N)."""
    if grid.boundary == "periodic":
        nxt = np.append(st.phi[1:], st.phi[0] + st.J)
        return (nxt - st.phi) / grid.ds
    return np.diff(st.phi) / grid.ds


def central_strain(st: SolverState, grid: Grid):
    """phi_s at nodes: central in the interior, one-sided at fixed ends."""
    ds = grid.ds
    if grid.boundary == "periodic":
        e = _extended(st, grid)
        return (e[2:] - e[:-2]) / (2 * ds)
    f = st.phi
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * ds)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * ds)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * ds)
    return out


def acceleration(st: SolverState, nm: NumericModel, grid: Grid, scheme="flux"):
    ds = grid.ds
    a = nm.H(st.phi)
    if scheme == "flux":
        if nm.gp is None:
            raise SolverError("flux scheme needs g' in closed form; use scheme='central'")
        F = nm.gp(forward_strain(st, grid))
        if grid.boundary == "periodic":
            a = a - (F - np.roll(F, 1)) / ds
        else:
            a = a.copy()
            a[1:-1] -= (F[1:] - F[:-1]) / ds
    elif scheme == "central":
        if grid.boundary == "periodic":
            e = _extended(st, grid)
            d1 = (e[2:] - e[:-2]) / (2 * ds)
            d2 = (e[2:] - 2 * e[1:-1] + e[:-2]) / ds**2
            a = a - nm.G(d1) * d2
        else:
            f = st.phi
            a = a.copy()
            d1 = (f[2:] - f[:-2]) / (2 * ds)
            d2 = (f[2:] - 2 * f[1:-1] + f[:-2]) / ds**2
            a[1:-1] -= nm.G(d1) * d2
    else:
        raise SolverError(f"unknown scheme {scheme!r}")
    if grid.boundary == "fixed":
        a[0] = a[-1] = 0.0
    return a


def _stretch_acc(st, nm: NumericModel, grid: Grid):
    if grid.boundary != "periodic":
        return 0.0
    if nm.H_affine is None:
        raise SolverError("periodic runs need an affine H (the stretch J obeys J'' = H(J) - H(0))")
    return nm.H_affine[1] * st.J


def _check(st: SolverState, grid: Grid):
    if not (np.all(np.isfinite(st.phi)) and np.all(np.isfinite(st.phi_t))):
        bad = int(np.argmax(~np.isfinite(st.phi) | ~np.isfinite(st.phi_t)))
        raise SolverError(f"non-finite value at index {bad}, t = {st.t:.6g}")
    d = forward_strain(st, grid)
    if np.any(d <= 0):
        i = int(np.argmin(d))
        raise PositivityError(i, float(d[i]), st.t)


def step(st: SolverState, m, dt, grid: Grid, scheme="flux", nm: NumericModel | None = None):
    """One velocity-Verlet step; returns a new state."""
    nm = nm or numeric_model(m)
    a0 = acceleration(st, nm, grid, scheme)
    A0 = _stretch_acc(st, nm, grid)
    half = st.phi_t + 0.5 * dt * a0
    Jh = st.J_t + 0.5 * dt * A0
    new = SolverState(st.phi + dt * half, half, st.t + dt, st.step + 1, st.J + dt * Jh, Jh)
    a1 = acceleration(new, nm, grid, scheme)
    A1 = _stretch_acc(new, nm, grid)
    new.phi_t = half + 0.5 * dt * a1
    new.J_t = Jh + 0.5 * dt * A1
    if grid.boundary == "fixed":
        new.phi_t[0] = new.phi_t[-1] = 0.0
    _check(new, grid)
    return new


def wave_speed(st: SolverState, nm: NumericModel, grid: Grid):
    G = nm.G(central_strain(st, grid))
    if np.any(G >= 0) or not np.all(np.isfinite(G)):
        i = int(np.argmax(~(G < 0)))
        raise SolverError(f"G(phi_s) >= 0 at index {i}: equation is not hyperbolic there")
    return np.sqrt(-G)


def cfl_dt(st: SolverState, m, grid: Grid, nu=0.5, nm: NumericModel | None = None):
    """nu * ds / max sqrt(-G(phi_s))."""
    nm = nm or numeric_model(m)
    return nu * grid.ds / float(np.max(wave_speed(st, nm, grid)))


# ---------------------------------------------------------------------------
# monitors


@dataclass
class Monitor:
    """Integral of a Lagrangian current density plus the boundary flux through time."""

    name: str
    density: Callable
    flux: Callable
    current: object = None
    _flux_integral: float = 0.0
    _last_flux: float | None = None

    def reset(self):
        self._flux_integral = 0.0
        self._last_flux = None


_MONITOR_ARGS = (t, s, phi, phi_t, phi_s)


def attach_monitor(current, name=None) -> Monitor:
    """Compile a Lagrangian current for evaluation on grid fields."""
    if getattr(current, "frame", "lagrangian") != "lagrangian":
        raise SolverError("monitors need a Lagrangian-frame current")
    m = current.model
    exprs = []
    for e in (current.density, current.flux):
        e = sp.sympify(e)
        if m is not None:
            e = m.expand_antiderivatives(e)
        if LAGRANGIAN.jet_order(e) > 1:
            raise SolverError("monitor current references second-order jets")
        extra = e.free_symbols - set(_MONITOR_ARGS)
        if extra:
            raise SolverError(f"monitor current has unbound symbols {sorted(map(str, extra))}")
        if e.atoms(sp.core.function.AppliedUndef):
            raise SolverError("monitor current still contains unevaluated functions")
        exprs.append(e)
    fd = sp.lambdify(_MONITOR_ARGS, exprs[0], modules="numpy")
    ff = sp.lambdify(_MONITOR_ARGS, exprs[1], modules="numpy")

    def wrap(f):
        def call(*args):
            return np.broadcast_to(np.asarray(f(*args), dtype=float), np.shape(args[1])).astype(float)

        return call

    return Monitor(name or getattr(current, "source", "monitor"), wrap(fd), wrap(ff), current)


def _cell_fields(st: SolverState, grid: Grid):
    if grid.boundary == "periodic":
        nxt = np.append(st.phi[1:], st.phi[0] + st.J)
        nxt_t = np.append(st.phi_t[1:], st.phi_t[0] + st.J_t)
    else:
        nxt, nxt_t = st.phi[1:], st.phi_t[1:]
        st = replace(st, phi=st.phi[:-1], phi_t=st.phi_t[:-1])
    return (st.phi + nxt) / 2, (st.phi_t + nxt_t) / 2, forward_strain_pair(st.phi, nxt, grid.ds)


def forward_strain_pair(a, b, ds):
    return (b - a) / ds


def _boundary_fields(st: SolverState, grid: Grid):
    """(phi, phi_t, phi_s) at s = 0 and s = S."""
    ps = central_strain(st, grid)
    if grid.boundary == "periodic":
        return (st.phi[0], st.phi_t[0], ps[0]), (st.phi[0] + st.J, st.phi_t[0] + st.J_t, ps[0])
    return (st.phi[0], st.phi_t[0], ps[0]), (st.phi[-1], st.phi_t[-1], ps[-1])


def monitor_value(mon: Monitor, st: SolverState, grid: Grid):
    """Midpoint-rule integral of T^t over [0, S] (without the flux term)."""
    ph, pt, ps = _cell_fields(st, grid)
    dens = mon.density(st.t, grid.midpoints, ph, pt, ps)
    return float(np.sum(dens) * grid.ds)


def boundary_flux(mon: Monitor, st: SolverState, grid: Grid):
    """[T^s]_{s=0}^{s=S}."""
    (p0, v0, d0), (p1, v1, d1) = _boundary_fields(st, grid)
    a = mon.flux(st.t, np.array([0.0]), np.array([p0]), np.array([v0]), np.array([d0]))[0]
    b = mon.flux(st.t, np.array([grid.S]), np.array([p1]), np.array([v1]), np.array([d1]))[0]
    return float(b - a)


@dataclass
class MonitorSeries:
    names: list
    records: list = field(default_factory=list)

    def append(self, t, values, cfl, min_strain):
        self.records.append({"t": t, **dict(zip(self.names, values)), "cfl": cfl, "min_phi_s": min_strain})

    def column(self, name):
        return np.array([r[name] for r in self.records])

    def drift(self, name, relative=True):
        col = self.column(name)
        d = float(np.max(np.abs(col - col[0])))
        if relative:
            scale = abs(col[0]) if col[0] != 0 else 1.0
            d /= scale
        return d

    def __len__(self):
        return len(self.records)


# ---------------------------------------------------------------------------
# driver


@dataclass
class Solver:
    model: ModelSpec
    grid: Grid
    scheme: str = "flux"
    monitors: list = field(default_factory=list)

    def __post_init__(self):
        self.nm = numeric_model(self.model)

    def attach(self, current, name=None):
        mon = attach_monitor(current, name)
        self.monitors.append(mon)
        return mon

    def cfl_dt(self, st, nu=0.5):
        return cfl_dt(st, self.model, self.grid, nu, self.nm)

    def _record(self, series, st, dt):
        vals = []
        for mon in self.monitors:
            fl = boundary_flux(mon, st, self.grid)
            if mon._last_flux is not None:
                mon._flux_integral += 0.5 * dt * (fl + mon._last_flux)
            mon._last_flux = fl
            vals.append(monitor_value(mon, st, self.grid) + mon._flux_integral)
        c = wave_speed(st, self.nm, self.grid)
        cfl = float(dt * np.max(c) / self.grid.ds)
        if cfl > 1.0:
            raise SolverError(f"CFL number {cfl:.3f} > 1 at t = {st.t:.6g}; the fixed step is no longer stable")
        series.append(st.t, vals, cfl, float(np.min(forward_strain(st, self.grid))))

    def run(self, st: SolverState, t_end, dt=None, nu=0.5, snapshots=(), callback=None):
        """Integrate to t_end with a fixed step (CFL-limited if dt is None)."""
        dt_max = self.cfl_dt(st, nu)
        if dt is None:
            dt = dt_max
        elif dt > dt_max * (1 + 1e-12):
            raise SolverError(f"dt = {dt:.3e} exceeds the CFL limit {dt_max:.3e}")
        n = max(1, math.ceil((t_end - st.t) / dt - 1e-9))
        dt = (t_end - st.t) / n
        for mon in self.monitors:
            mon.reset()
        series = MonitorSeries([m.name for m in self.monitors])
        self._record(series, st, dt)
        snaps = {}
        wanted = sorted(snapshots)
        for _ in range(n):
            st = step(st, self.model, dt, self.grid, self.scheme, self.nm)
            self._record(series, st, dt)
            if callback:
                callback(st)
            for k in wanted:
                if k == st.step:
                    snaps[k] = st.copy()
        return st, series, snaps


# ---------------------------------------------------------------------------
# initial conditions


def _periodic_gaussian(x, center, width, S):
    out = np.zeros_like(x)
    for k in (-2, -1, 0, 1, 2):
        out += np.exp(-((x - center + k * S) ** 2) / (2 * width**2))
    return out


def initial_state(grid: Grid, kind="equilibrium", strain=1.0, velocity=0.0, amplitude=0.0,
                  center=None, width=0.05, mode=1, phi_expr=None, phi_t_expr=None, model=None):
    """Initial-condition library.

    kinds: equilibrium, uniform_velocity, gaussian (bump on phi_t),
    sine_strain (phi_s = strain + amplitude cos(2 pi mode s / S)),
    expression (phi and phi_t given in the text grammar in s).
    """
    x = grid.nodes
    S = grid.S
    center = S / 2 if center is None else center
    phi0 = strain * x
    v = np.zeros_like(x)
    if kind == "equilibrium":
        pass
    elif kind == "uniform_velocity":
        v = v + velocity
    elif kind == "gaussian":
        bump = _periodic_gaussian(x, center, width, S) if grid.boundary == "periodic" else np.exp(-((x - center) ** 2) / (2 * width**2))
        v = velocity + amplitude * bump
    elif kind == "sine_strain":
        k = 2 * np.pi * mode / S
        phi0 = phi0 + amplitude / k * np.sin(k * x)
        v = v + velocity
    elif kind == "expression":
        from .expr import parse

        names = model.names() if model is not None else None
        fp = sp.lambdify(s, parse(phi_expr, names=names), modules="numpy")
        phi0 = np.broadcast_to(np.asarray(fp(x), dtype=float), x.shape).copy()
        if phi_t_expr is not None:
            fv = sp.lambdify(s, parse(phi_t_expr, names=names), modules="numpy")
            v = np.broadcast_to(np.asarray(fv(x), dtype=float), x.shape).copy()
        if grid.boundary == "periodic":
            J = float(fp(S) - fp(0.0))
            st = SolverState(phi0, v.astype(float), J=J)
            if phi_t_expr is not None:
                st.J_t = float(fv(S) - fv(0.0))
            _check(st, grid)
            return st
    else:
        raise SolverError(f"unknown initial condition {kind!r}")
    if grid.boundary == "fixed":
        v[0] = v[-1] = 0.0
    st = SolverState(phi0.astype(float), v.astype(float), J=strain * S)
    _check(st, grid)
    return st


# ---------------------------------------------------------------------------
# Eulerian fields


def to_eulerian_fields(st: SolverState, grid: Grid):
    """Sampled (x_i, rho_i, u_i) with x = phi, rho = 1/phi_s, u = phi_t."""
    x = st.phi.copy()
    ps = central_strain(st, grid)
    if np.any(np.diff(x) <= 0) or np.any(ps <= 0):
        raise SolverError("phi is not monotone in s; no Eulerian representation")
    return x, 1.0 / ps, st.phi_t.copy()


def _nonuniform_derivative(x, f):
    """Three-point derivative on a non-uniform grid (interior points)."""
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    return (-h1 / (h0 * (h0 + h1)) * f[:-2] + (h1 - h0) / (h0 * h1) * f[1:-1] + h0 / (h1 * (h0 + h1)) * f[2:])


def eulerian_residuals(before: SolverState, mid: SolverState, after: SolverState, grid: Grid, nm: NumericModel):
    """Discrete residuals of the continuity and momentum equations at the middle snapshot.

    Time derivatives at fixed x come from material derivatives along
    particles minus the convective term.
    """
    dt2 = after.t - before.t
    xb, rb, ub = to_eulerian_fields(before, grid)
    xm, rm, um = to_eulerian_fields(mid, grid)
    xa, ra, ua = to_eulerian_fields(after, grid)
    Drho = (ra - rb) / dt2
    Du = (ua - ub) / dt2
    if grid.boundary == "periodic":
        xe = np.concatenate(([xm[-1] - mid.J], xm, [xm[0] + mid.J]))
        re = np.concatenate(([rm[-1]], rm, [rm[0]]))
        ue = np.concatenate(([um[-1] - mid.J_t], um, [um[0] + mid.J_t]))
        sl = slice(None)
    else:
        xe, re, ue = xm, rm, um
        sl = slice(1, -1)
    rho_x = _nonuniform_derivative(xe, re)
    u_x = _nonuniform_derivative(xe, ue)
    r, u_, x = rm[sl], um[sl], xm[sl]
    rho_t = Drho[sl] - u_ * rho_x
    u_t = Du[sl] - u_ * u_x
    r1 = rho_t + u_ * rho_x + r * u_x
    r2 = u_t + u_ * u_x - nm.G(1.0 / r) * r**-3 * rho_x - nm.H(x)
    return r1, r2
