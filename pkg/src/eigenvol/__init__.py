"""eigenvol: Laplace eigenvalue bounds on surfaces via conformal volume.

Numerical companion for the circle of results connecting first and higher
Laplace eigenvalues of closed surfaces with the conformal volume of maps
to round spheres: finite-element spectra on triangle meshes, the Moebius
test-function machinery, greedy annulus decompositions of measures, and a
verification harness with fully explicit constants.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .confvol import SphereImmersion, conformal_volume, hersch_center
from .fixtures import (
    clifford_torus,
    flat_torus,
    icosphere,
    revolution_torus,
    veronese,
)
from .harness import (
    VerificationError,
    proof_constants,
    run_verification,
)
from .mesh import TriangleMesh, load_off, save_off
from .moebius import Annulus, MoebiusMap
from .packing import (
    DiscreteMeasure,
    gny_decompose,
    pushforward_measure,
    select_light,
    verify_family,
)
from .spectral import (
    assemble_laplacian,
    eigensolve,
    negative_count,
    stability_index,
    weyl_fit,
)

__all__ = [
    "Annulus",
    "DiscreteMeasure",
    "MoebiusMap",
    "SphereImmersion",
    "TriangleMesh",
    "VerificationError",
    "assemble_laplacian",
    "clifford_torus",
    "conformal_volume",
    "eigensolve",
    "flat_torus",
    "gny_decompose",
    "hersch_center",
    "icosphere",
    "load_off",
    "negative_count",
    "proof_constants",
    "pushforward_measure",
    "revolution_torus",
    "run_verification",
    "save_off",
    "select_light",
    "stability_index",
    "verify_family",
    "veronese",
    "weyl_fit",
    "__version__",
]
