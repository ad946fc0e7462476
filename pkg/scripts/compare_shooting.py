#!/usr/bin/env python3
"""Symbolic chain against the return-map oracle on a chosen perturbation."""
import argparse

from melnikov.algebra import SPECS
from melnikov.cli import parse_one_form
from melnikov.numerics import shooting_oracle
from melnikov.reduction import francoise_chain


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ham", default="eight-loop", choices=sorted(SPECS))
    ap.add_argument("--annulus", default="interior_right")
    ap.add_argument("--form", default="y dx")
    ap.add_argument("--t", type=float, nargs="+", default=[0.06, 0.10, 0.15])
    args = ap.parse_args()
    spec = SPECS[args.ham]
    w = parse_one_form(args.form)
    chain = francoise_chain(w, spec, args.annulus)
    print("symbolic order:", chain.k)
    print("generating function:", chain.genfn.to_json())
    samp = shooting_oracle(spec, w, args.annulus, args.t, symbolic=chain.genfn)
    print("fitted order:", samp.fitted_k, " fit residual:", samp.fit_residual)
    for t, sv, bv in zip(samp.t_grid, samp.symbolic, samp.shooting):
        rel = abs(sv - bv) / abs(sv) if sv else float("nan")
        print(f"  t={t:+.4f}  symbolic {sv:+.8e}  shooting {bv:+.8e}  rel {rel:.1e}")


if __name__ == "__main__":
    main()
