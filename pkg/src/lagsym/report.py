"""Verification suites, simulation runs and Markdown rendering behind the CLI.

Every suite takes a seed and derives one generator per item from it, so
results do not depend on the order in which items run.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .config import SimConfig
from .expr import to_text
from .noether import (
    NoEulerianRepresentation,
    NoetherError,
    noether_current,
    reproduce_row,
    table_rows,
    to_eulerian,
)
from .symmetry import catalog, check_admitted, entry
from .solver import Grid, Solver, initial_state, to_eulerian_fields


def _rng(seed, *keys):
    """Per-item generator: stable under reordering of the items."""
    salt = [sum(ord(ch) * 31**i for i, ch in enumerate(k)) % (2**32) for k in keys]
    return np.random.default_rng([seed, *salt])


# ---------------------------------------------------------------------------
# symmetries


def verify_symmetries(entries=None, generator=None, extra=None, seed=0, samples=100):
    """check_admitted over the selected entries.

    ``extra`` is an optional (entry_name, Generator) pair checked in
    addition, used to inject hand-written generators.
    """
    chosen = catalog() if not entries else [entry(n) for n in entries]
    jobs = []
    for e in chosen:
        for X in e.generators:
            if generator is None or X.name == generator:
                jobs.append((e, X))
    if generator is not None and not jobs and extra is None:
        raise KeyError(f"no generator {generator!r} in {[e.name for e in chosen]}")
    if extra is not None:
        jobs.append((entry(extra[0]), extra[1]))
    out = []
    for e, X in jobs:
        ok, R = check_admitted(X, e.model, samples=samples, rng=_rng(seed, e.name, X.name))
        out.append(
            {
                "entry": e.name,
                "generator": X.name,
                "field": X.text(),
                "conditions": {k: str(v) for k, v in X.when},
                "citation": X.citation or e.source,
                "admitted": bool(ok),
                "residual": to_text(R),
            }
        )
    return out


# ---------------------------------------------------------------------------
# currents


def verify_currents(rows=None, seed=0):
    out = []
    for r in table_rows():
        if rows and r.name not in rows:
            continue
        out.append(reproduce_row(r, rng=_rng(seed, r.name)).to_json())
    if rows:
        unknown = set(rows) - {o["row"] for o in out}
        if unknown:
            raise KeyError(f"unknown table rows {sorted(unknown)}")
    return out


def derive_current(entry_name, generator, frame="lagrangian", seed=0):
    e = entry(entry_name)
    X = e.generator(generator)
    c = noether_current(X, e.model, rng=_rng(seed, entry_name, generator))
    if frame == "eulerian":
        c = to_eulerian(c)
    out = c.to_json()
    out.update({"entry": entry_name, "generator": generator, "citation": X.citation or e.source})
    return out


# ---------------------------------------------------------------------------
# simulation


def _fmt(v):
    return repr(float(v))


def run_simulation(cfg: SimConfig, out_dir=None):
    """Run one configured simulation; write CSVs when out_dir is given."""
    m = cfg.model()
    grid = Grid(cfg.grid.N, cfg.grid.S, cfg.grid.boundary)
    sol = Solver(m, grid, cfg.scheme)
    for name, X in cfg.generators():
        sol.attach(noether_current(X, m), name)
    ic = cfg.ic
    st = initial_state(grid, ic.kind, ic.strain, ic.velocity, ic.amplitude, ic.center, ic.width, ic.mode,
                       ic.phi, ic.phi_t, model=m)
    final, series, snaps = sol.run(st, cfg.t_end, dt=cfg.dt, nu=cfg.cfl, snapshots=cfg.output.snapshot_steps)
    snaps.setdefault(final.step, final)

    mon_csv = io.StringIO()
    w = csv.writer(mon_csv, lineterminator="\n")
    w.writerow(["step", "t", *series.names, "cfl", "min_phi_s"])
    for k, r in enumerate(series.records):
        w.writerow([k, _fmt(r["t"]), *(_fmt(r[n]) for n in series.names), _fmt(r["cfl"]), _fmt(r["min_phi_s"])])
    fields_csv = io.StringIO()
    w = csv.writer(fields_csv, lineterminator="\n")
    w.writerow(["step", "t", "s", "phi", "phi_t", "x", "rho", "u"])
    for k in sorted(snaps):
        sn = snaps[k]
        x, rho, u = to_eulerian_fields(sn, grid)
        for i, s_i in enumerate(grid.nodes):
            w.writerow([k, _fmt(sn.t), _fmt(s_i), _fmt(sn.phi[i]), _fmt(sn.phi_t[i]), _fmt(x[i]), _fmt(rho[i]), _fmt(u[i])])

    files = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        p = out_dir / cfg.output.monitors_csv
        p.write_text(mon_csv.getvalue())
        files["monitors_csv"] = str(p)
        if cfg.output.fields_csv:
            p = out_dir / cfg.output.fields_csv
            p.write_text(fields_csv.getvalue())
            files["fields_csv"] = str(p)

    drifts = {}
    for n in series.names:
        col = series.column(n)
        drifts[n] = {
            "initial": float(col[0]),
            "final": float(col[-1]),
            "max_abs_drift": series.drift(n, relative=False),
            "max_rel_drift": series.drift(n, relative=True),
        }
    return {
        "model": m.describe(),
        "grid": {"N": grid.N, "S": grid.S, "boundary": grid.boundary},
        "steps": final.step,
        "t_end": final.t,
        "max_cfl": float(series.column("cfl").max()),
        "min_phi_s": float(series.column("min_phi_s").min()),
        "monitors": drifts,
        "files": files,
        "monitors_csv": mon_csv.getvalue(),
    }


# ---------------------------------------------------------------------------
# Markdown


def _md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(lines)


def render_report(symmetries=None, currents=None, simulations=None, seed=0):
    parts = ["# lagsym verification report", "", f"seed: {seed}", ""]
    if symmetries is not None:
        n_ok = sum(r["admitted"] for r in symmetries)
        parts += [f"## Point symmetries ({n_ok}/{len(symmetries)} admitted)", ""]
        parts.append(
            _md_table(
                ["entry", "generator", "field", "conditions", "verdict", "source"],
                [
                    (r["entry"], r["generator"], f"`{r['field']}`",
                     ", ".join(f"{k}={v}" for k, v in r["conditions"].items()) or "-",
                     "PASS" if r["admitted"] else f"FAIL `{r['residual']}`", r["citation"])
                    for r in symmetries
                ],
            )
        )
        parts.append("")
    if currents is not None:
        n_ok = sum(r["status"] != "FAIL" for r in currents)
        parts += [f"## Eulerian conservation laws ({n_ok}/{len(currents)} recovered)", ""]
        parts.append(
            _md_table(
                ["row", "status", "scalar", "printed conserved", "source"],
                [(r["row"], r["status"], r.get("scalar", "-"), r.get("printed_conserved", "-"), r["citation"])
                 for r in currents],
            )
        )
        for r in currents:
            if r.get("printed_defect"):
                parts += [
                    "",
                    f"Row `{r['row']}`: {r['printed_defect']}.",
                    f"Derived density `{r['derived_density']}`, flux `{r['derived_flux']}`;"
                    f" the corrected row matches with scalar {r['corrected_scalar']}.",
                ]
            if r.get("error"):
                parts += ["", f"Row `{r['row']}` failed: {r['error']}"]
        parts.append("")
    for name, sim in (simulations or {}).items():
        parts += [f"## Simulation `{name}`", "",
                  f"{sim['model']}; N = {sim['grid']['N']}, {sim['grid']['boundary']},"
                  f" {sim['steps']} steps to t = {sim['t_end']:.6g}, max CFL {sim['max_cfl']:.3f},"
                  f" min phi_s {sim['min_phi_s']:.4f}", ""]
        parts.append(
            _md_table(
                ["monitor", "initial", "final", "max abs drift", "max rel drift"],
                [(k, f"{v['initial']:.12e}", f"{v['final']:.12e}", f"{v['max_abs_drift']:.3e}", f"{v['max_rel_drift']:.3e}")
                 for k, v in sim["monitors"].items()],
            )
        )
        parts.append("")
    return "\n".join(parts)


def all_passed(symmetries=None, currents=None):
    ok = True
    if symmetries is not None:
        ok &= all(r["admitted"] for r in symmetries)
    if currents is not None:
        ok &= all(r["status"] != "FAIL" for r in currents)
    return ok


__all__ = [
    "verify_symmetries",
    "verify_currents",
    "derive_current",
    "run_simulation",
    "render_report",
    "all_passed",
    "NoetherError",
    "NoEulerianRepresentation",
]
