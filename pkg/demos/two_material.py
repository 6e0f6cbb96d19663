"""Two solids and void: maximum bulk modulus with a quarter of each material.

Two level set functions split the cell into four colour regions; one is
the stiff material (E = 1), one the soft material (E = 0.5) and two are
void. Phase volumes are held at 0.25 each. The run is repeated with the
isotropy residuals added.

    python demos/two_material.py [--n 100]
"""
from _common import colour_picture, parse, progress, save

from lsmicro import RunConfig, hs_reference, run
from lsmicro.functionals import anisotropy_measure, bulk_modulus, isotropy_residuals_2d, volume

args = parse(__doc__.splitlines()[0])
bound = hs_reference("multiphase2d")
for preset in ("multiphase2d", "multiphase2d_iso"):
    print(f"--- {preset}")
    res = run(RunConfig.for_preset(preset, n=args.n), callback=progress(20))
    kappa = bulk_modulus(res.Cbar)
    print(f"{res.status} after {res.iterations} iterations: bulk modulus {kappa:.4f} "
          f"({kappa / bound:.1%} of {bound}), stiff {volume(res.state, 2):.4f}, soft {volume(res.state, 3):.4f}, "
          f"anisotropy {anisotropy_measure(isotropy_residuals_2d(res.Cbar)):.1e}")
    print("'#' stiff, '+' soft, '.' void")
    print(colour_picture(*res.state.phi), "\n")
save(res, args.out)
