"""Lightest microstructure with a prescribed negative Poisson ratio.

The objective is the solid fraction; five equality constraints pin the
effective tensor to C1111 = C2222 = 0.1, C1122 = -0.05 and no shear
coupling, which gives a Poisson ratio of -0.5. Starting from a 4 x 4 hole
array, the design has to rearrange into re-entrant cells.

    python demos/auxetic.py [--n 100]
"""
import numpy as np
from _common import ascii_picture, parse, progress, save

from lsmicro import RunConfig, run
from lsmicro.functionals import poisson_ratio, volume

args = parse(__doc__.splitlines()[0])
result = run(RunConfig.for_preset("auxetic2d", n=args.n), callback=progress(20))

np.set_printoptions(precision=4, suppress=True)
print(f"\n{result.status} after {result.iterations} iterations")
print(f"solid fraction {volume(result.state):.4f}, Poisson ratio {poisson_ratio(result.Cbar):+.4f}")
print("effective tensor (Voigt, engineering shear):")
print(result.Cbar, "\n")
print(ascii_picture(result.state.phi[0]))
save(result, args.out)
