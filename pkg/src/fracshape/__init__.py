"""Shape-difference metrics for compact sets, perturbed self-similar
constructions with their certificates, box-counting dimension tools, and
quasi-tiling checks."""

from fracshape.atlas import (
    ApproxReport,
    PieceGram,
    SimilarityIndex,
    SplineReport,
    check_spline,
    classify_approx,
    finite_structure_diagnostic,
    gram_csv,
    piece_gram,
    similarity_index,
    spline_cover,
    spline_svg,
)
from fracshape.boxdim import (
    BoxCountSeries,
    DimensionFit,
    MoranReport,
    ball_mass,
    box_counts,
    fit_box_dimension,
    loglog_svg,
    moran_mass_check,
    scale_ladder,
    series_csv,
)
from fracshape.geometry import (
    BallReport,
    PointCloud,
    Transform,
    diameter,
    hausdorff,
    min_enclosing_ball,
    transform_apply,
    transform_compose,
)
from fracshape.ifs import (
    IfsSpec,
    Word,
    cylinder_set,
    named_system,
    parse_system,
    prefractal,
    similarity_dimension,
)
from fracshape.metrics import MetricReport, MetricVariant, shape_difference
from fracshape.perturb import (
    Certificate,
    PerturbationSchedule,
    SeparationReport,
    StructureSystem,
    certify_perturbation,
    check_separation,
    interval_delta0,
    interval_eps0,
    perturb_composed,
    perturb_interval_cantor,
    rotation_eps0,
    structure_consistency,
    structure_from_ifs,
)
from fracshape.quasi import (
    CrystalReport,
    DensityReport,
    DotPattern,
    EngulfReport,
    Patch,
    Polygon,
    PrototileReport,
    SymmetryReport,
    TransitivityReport,
    check_quasi_prototiles,
    crystal_check,
    dodecagon_packing,
    engulf,
    group_product_defect,
    lattice_dots,
    monte_carlo_density,
    notched_dodecagon,
    packing_density,
    quasi_symmetry_lambda,
    quasi_transitivity,
    square_lattice,
    unit_square,
    wavy_partition,
)
from fracshape.registration import LIGHT_PARAMS, SearchParams, registration_search

__version__ = "0.1.0"

__all__ = [
    "ApproxReport",
    "BallReport",
    "BoxCountSeries",
    "Certificate",
    "CrystalReport",
    "DensityReport",
    "DimensionFit",
    "DotPattern",
    "EngulfReport",
    "IfsSpec",
    "LIGHT_PARAMS",
    "MetricReport",
    "MetricVariant",
    "MoranReport",
    "Patch",
    "PerturbationSchedule",
    "PieceGram",
    "PointCloud",
    "Polygon",
    "PrototileReport",
    "SearchParams",
    "SeparationReport",
    "SimilarityIndex",
    "SplineReport",
    "StructureSystem",
    "SymmetryReport",
    "Transform",
    "TransitivityReport",
    "Word",
    "ball_mass",
    "box_counts",
    "certify_perturbation",
    "check_quasi_prototiles",
    "check_separation",
    "check_spline",
    "classify_approx",
    "crystal_check",
    "cylinder_set",
    "diameter",
    "dodecagon_packing",
    "engulf",
    "finite_structure_diagnostic",
    "fit_box_dimension",
    "gram_csv",
    "group_product_defect",
    "hausdorff",
    "interval_delta0",
    "interval_eps0",
    "lattice_dots",
    "loglog_svg",
    "min_enclosing_ball",
    "monte_carlo_density",
    "moran_mass_check",
    "named_system",
    "notched_dodecagon",
    "packing_density",
    "parse_system",
    "perturb_composed",
    "perturb_interval_cantor",
    "piece_gram",
    "prefractal",
    "quasi_symmetry_lambda",
    "quasi_transitivity",
    "registration_search",
    "rotation_eps0",
    "scale_ladder",
    "series_csv",
    "shape_difference",
    "similarity_dimension",
    "similarity_index",
    "spline_cover",
    "spline_svg",
    "square_lattice",
    "structure_consistency",
    "structure_from_ifs",
    "transform_apply",
    "transform_compose",
    "unit_square",
    "wavy_partition",
    "__version__",
]
