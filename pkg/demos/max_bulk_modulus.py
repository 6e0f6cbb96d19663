"""Stiffest half-dense microstructure under hydrostatic load.

Starts from a 2 x 2 array of circular holes (about 70% solid) and maximises
the effective bulk modulus with the solid fraction held at 0.5. The result
is compared with the Hashin-Shtrikman upper bound for that volume fraction.

    python demos/max_bulk_modulus.py [--n 100] [--out results/bulk]
"""
from _common import ascii_picture, parse, progress, save

from lsmicro import RunConfig, hs_reference, run
from lsmicro.functionals import bulk_modulus, volume

args = parse(__doc__.splitlines()[0])
result = run(RunConfig.for_preset("bulk2d", n=args.n), callback=progress())

kappa = bulk_modulus(result.Cbar)
bound = hs_reference("bulk2d")
print(f"\n{result.status} after {result.iterations} iterations")
print(f"bulk modulus {kappa:.4f} = {kappa / bound:.1%} of the bound {bound}")
print(f"solid fraction {volume(result.state):.4f}\n")
print(ascii_picture(result.state.phi[0]))
save(result, args.out)
