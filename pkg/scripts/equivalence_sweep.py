#!/usr/bin/env python3
"""Push every catalog generator through every applicable equivalence map.

Prints one line per (entry, transform) with the number of images that are
still admitted; exits 1 if any image is not.

    python3 scripts/equivalence_sweep.py --eps 0.25 -0.5
"""
import argparse
import sys
from fractions import Fraction

import sympy as sp

from lagsym.equivalence import EquivalenceError, applicable, apply_equivalence
from lagsym.symmetry import catalog, check_admitted


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=str, nargs="+", default=["1/4", "-1/2"])
    args = ap.parse_args()
    epsilons = [sp.Rational(str(Fraction(e))) for e in args.eps]
    failures = 0
    for e in catalog():
        for E in applicable(e.model):
            ok = skipped = total = 0
            for eps in epsilons:
                for X in e.generators:
                    total += 1
                    try:
                        m2, X2 = apply_equivalence(E, eps, e.model, X)
                    except EquivalenceError:
                        skipped += 1
                        continue
                    good, _ = check_admitted(X2, m2)
                    ok += good
                    if not good:
                        failures += 1
                        print(f"  not admitted: {e.name} {E.name} eps={eps} {X.name}")
            print(f"{e.name:24s} {E.name:4s} {ok}/{total - skipped} admitted ({skipped} outside validity domain)")
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
