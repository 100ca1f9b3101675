"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .expr import ExprError, SamplingError, SimplifierGap
from .noether import NoEulerianRepresentation, NoetherError
from .solver import SolverError
from .symmetry import Generator, entry
from . import report as rp

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _global(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d if suppress else 0, help="seed for random zero-test sampling")
    p.add_argument("--json", action="store_true", default=d if suppress else False, help="emit JSON instead of text")
    p.add_argument("--out", default=d, help="directory for report and CSV artifacts")


def build_parser():
    ap = argparse.ArgumentParser(prog="lagsym", description="Symmetry, conservation-law and simulation workbench "
                                 "for phi_tt + G(phi_s) phi_ss - H(phi) = 0.")
    _global(ap, False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-symmetries", help="check catalog generators against the determining equation")
    _global(p, True)
    p.add_argument("--entry", action="append", help="catalog entry (repeatable)")
    p.add_argument("--generator", help="only this generator name")
    p.add_argument("--all", action="store_true", help="every catalog entry")
    p.add_argument("--xi-t", help="inline generator: xi_t (needs --entry)")
    p.add_argument("--xi-s", help="inline generator: xi_s")
    p.add_argument("--eta", help="inline generator: eta")
    p.add_argument("--samples", type=int, default=100)

    p = sub.add_parser("verify-currents", help="re-derive the encoded Eulerian conservation laws")
    _global(p, True)
    p.add_argument("--row", action="append", help="table row name (repeatable)")

    p = sub.add_parser("derive-current", help="Noether current of one catalog generator")
    _global(p, True)
    p.add_argument("--entry", required=True)
    p.add_argument("--generator", required=True)
    p.add_argument("--frame", choices=("lagrangian", "eulerian"), default="lagrangian")
    p.add_argument("--emit", choices=("text", "json"), default="text")

    p = sub.add_parser("simulate", help="run a configured simulation and write CSV series")
    _global(p, True)
    p.add_argument("--config", required=True)

    p = sub.add_parser("report", help="Markdown summary of the verification suites and simulations")
    _global(p, True)
    p.add_argument("--config", action="append", default=[], help="simulation config to include (repeatable)")
    p.add_argument("--skip-symmetries", action="store_true")
    p.add_argument("--skip-currents", action="store_true")
    return ap


def _emit(args, payload, text):
    out = json.dumps(payload, indent=2, sort_keys=True) if args.json else text
    print(out)
    return out


def _write(args, name, content):
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(content if content.endswith("\n") else content + "\n")


def cmd_verify_symmetries(args):
    if not args.all and not args.entry:
        raise UsageError("give --all or at least one --entry")
    extra = None
    if any(v is not None for v in (args.xi_t, args.xi_s, args.eta)):
        if not args.entry or len(args.entry) != 1:
            raise UsageError("an inline generator needs exactly one --entry")
        e = entry(args.entry[0])
        coeffs = [e.model.parse(v or "0") for v in (args.xi_t, args.xi_s, args.eta)]
        extra = (e.name, Generator("inline", *coeffs, e.model.domain))
        results = rp.verify_symmetries([e.name], generator="inline", extra=extra, seed=args.seed, samples=args.samples)
    else:
        results = rp.verify_symmetries(None if args.all else args.entry, args.generator, seed=args.seed,
                                       samples=args.samples)
    lines = []
    for r in results:
        verdict = "PASS" if r["admitted"] else "FAIL"
        line = f"{verdict} {r['entry']} {r['generator']}: {r['field']}  [{r['citation']}]"
        if not r["admitted"]:
            line += f"\n     residual: {r['residual']}"
        lines.append(line)
    n_ok = sum(r["admitted"] for r in results)
    lines.append(f"{n_ok}/{len(results)} generators admitted")
    text = _emit(args, results, "\n".join(lines))
    _write(args, "verify-symmetries.json" if args.json else "verify-symmetries.txt", text)
    return OK if rp.all_passed(symmetries=results) else FAILED


def cmd_verify_currents(args):
    results = rp.verify_currents(args.row, seed=args.seed)
    lines = []
    for r in results:
        if r["status"] == "FAIL":
            lines.append(f"FAIL {r['row']}: {r.get('error') or 'not recovered'}  [{r['citation']}]")
            continue
        if r["status"] == "match":
            lines.append(f"PASS {r['row']}: derived = {r['scalar']} x printed  [{r['citation']}]")
        else:
            lines.append(
                f"PASS {r['row']}: differs from printed ({r['printed_defect']}); derived = {r['corrected_scalar']}"
                f" x corrected row  [{r['citation']}]\n     derived density: {r['derived_density']}"
                f"\n     derived flux:    {r['derived_flux']}"
            )
    n_ok = sum(r["status"] != "FAIL" for r in results)
    lines.append(f"{n_ok}/{len(results)} rows recovered")
    text = _emit(args, results, "\n".join(lines))
    _write(args, "verify-currents.json" if args.json else "verify-currents.txt", text)
    return OK if rp.all_passed(currents=results) else FAILED


def cmd_derive_current(args):
    try:
        c = rp.derive_current(args.entry, args.generator, args.frame, seed=args.seed)
    except NoEulerianRepresentation as err:
        print(f"no Eulerian form: {err}", file=sys.stderr)
        return FAILED
    except NoetherError as err:
        print(f"{err}", file=sys.stderr)
        return FAILED
    if args.json or args.emit == "json":
        text = json.dumps(c, indent=2, sort_keys=True)
        print(text)
    else:
        text = f"{args.entry} {args.generator} ({c['frame']} frame)\n  density: {c['density']}\n  flux:    {c['flux']}"
        print(text)
    _write(args, f"current-{args.entry}-{args.generator}.{'json' if args.json or args.emit == 'json' else 'txt'}", text)
    return OK


def cmd_simulate(args):
    cfg = load_config(args.config)
    res = rp.run_simulation(cfg, args.out or ".")
    payload = {k: v for k, v in res.items() if k != "monitors_csv"}
    lines = [f"{res['model']}: {res['steps']} steps to t = {res['t_end']:.6g}, max CFL {res['max_cfl']:.3f}"]
    for k, v in res["monitors"].items():
        lines.append(f"  {k:12s} rel drift {v['max_rel_drift']:.3e}  abs drift {v['max_abs_drift']:.3e}")
    for k, v in res["files"].items():
        lines.append(f"  wrote {v}")
    _emit(args, payload, "\n".join(lines))
    return OK


def cmd_report(args):
    sym = None if args.skip_symmetries else rp.verify_symmetries(seed=args.seed)
    cur = None if args.skip_currents else rp.verify_currents(seed=args.seed)
    sims = {}
    for path in args.config:
        cfg = load_config(path)
        sims[Path(path).stem] = rp.run_simulation(cfg, None)
    md = rp.render_report(sym, cur, sims, seed=args.seed)
    if args.json:
        payload = {"symmetries": sym, "currents": cur,
                   "simulations": {k: {kk: vv for kk, vv in v.items() if kk != "monitors_csv"} for k, v in sims.items()}}
        text = json.dumps(payload, indent=2, sort_keys=True)
        print(text)
        _write(args, "report.json", text)
    else:
        print(md)
        _write(args, "report.md", md)
    return OK if rp.all_passed(sym, cur) else FAILED


COMMANDS = {
    "verify-symmetries": cmd_verify_symmetries,
    "verify-currents": cmd_verify_currents,
    "derive-current": cmd_derive_current,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, KeyError) as err:
        msg = err.args[0] if isinstance(err, KeyError) and err.args else err
        print(f"error: {msg}", file=sys.stderr)
        return USAGE
    except OSError as err:
        print(f"error: {err.filename}: {err.strerror}", file=sys.stderr)
        return USAGE
    except (SimplifierGap, SamplingError, SolverError) as err:
        print(f"error: {err}", file=sys.stderr)
        return FAILED
    except ExprError as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
