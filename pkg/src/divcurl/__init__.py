"""Whitney-cube extension of vector fields across rough boundaries and
empirical estimation of div-curl inequality constants.

The pipeline: a gallery domain (squares, an L, Koch prefractals, prisms)
is tiled by interior and complement Whitney cubes; small complement cubes
get reflected interior partners joined by chains; a smooth partition of
unity glues affine fits on the reflected cubes into an extension Ev that
agrees with v on the domain.  The lab estimates the constants of the
field+div+curl and div+curl norm inequalities on grid-sampled collar
fields and cross-checks the quadratic case against a spectral oracle.
"""

from .domains import Domain, gallery, dset_check
from .cubes import DyadicCube, RootBox, root_for_domain
from .whitney import whitney_decompose, select_w3, verify_invariants, cube_graph_path
from .reflection import build_reflection, build_chains, overlap_statistic
from .partition import build_partition, eval_partition, partition_sum
from .fields import (
    Grid,
    GridField,
    build_grid,
    gradient,
    divergence,
    curl,
    lp_norm,
    norm_bundle,
    generate_test_field,
    save_field,
    load_field,
)
from .affine import AffinePolynomial, chain_difference, fit_affine, residual_report
from .extension import build_extension_geometry, extend, global_report
from .lab import (
    friedrichs_ratio,
    gaffney_ratio,
    estimate_constant,
    spectral_oracle_p2,
    witness_scan,
    koch_level_study,
)
from .probe import epsilon_delta_probe
from .verify import run_suite

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "gallery",
    "dset_check",
    "DyadicCube",
    "RootBox",
    "root_for_domain",
    "whitney_decompose",
    "select_w3",
    "verify_invariants",
    "cube_graph_path",
    "build_reflection",
    "build_chains",
    "overlap_statistic",
    "build_partition",
    "eval_partition",
    "partition_sum",
    "Grid",
    "GridField",
    "build_grid",
    "gradient",
    "divergence",
    "curl",
    "lp_norm",
    "norm_bundle",
    "generate_test_field",
    "save_field",
    "load_field",
    "AffinePolynomial",
    "chain_difference",
    "fit_affine",
    "residual_report",
    "build_extension_geometry",
    "extend",
    "global_report",
    "friedrichs_ratio",
    "gaffney_ratio",
    "estimate_constant",
    "spectral_oracle_p2",
    "witness_scan",
    "koch_level_study",
    "epsilon_delta_probe",
    "run_suite",
    "__version__",
]
