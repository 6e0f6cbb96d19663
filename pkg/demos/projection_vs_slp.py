"""Same problem, two velocity rules.

Runs the half-volume bulk modulus problem with the constrained projection
velocity and with sequential linear programming (trust-region LP over the
objective and constraint sensitivities), then prints both histories side
by side every ten iterations.

    python demos/projection_vs_slp.py [--n 100]
"""
from _common import parse

from lsmicro import RunConfig, run
from lsmicro.functionals import bulk_modulus

args = parse(__doc__.splitlines()[0])
runs = {m: run(RunConfig.for_preset("bulk2d", n=args.n, method=m)) for m in ("projection", "slp")}

print(f"{'iter':>5} | {'projection J':>12} {'Vol err':>9} | {'SLP J':>12} {'Vol err':>9}")
longest = max(len(r.history) for r in runs.values())
for q in range(0, longest, 10):
    cells = []
    for r in runs.values():
        if q < len(r.history):
            h = r.history[q]
            cells.append(f"{h.objective:12.5f} {h.constraints[0]:+9.1e}")
        else:
            cells.append(" " * 22)
    print(f"{q + 1:5d} | {cells[0]} | {cells[1]}")
for m, r in runs.items():
    print(f"{m}: {r.status} after {r.iterations} iterations, bulk modulus {bulk_modulus(r.Cbar):.4f}")
