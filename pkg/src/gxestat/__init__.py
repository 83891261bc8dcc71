"""Genotype-by-environment interaction analysis.

Mixed-model significance testing (REML variance components, BLUPs,
likelihood-ratio and F tests), per-genotype stability statistics, and
the AMMI / GGE multiplicative models with biplot geometry export.
"""

from .data import (
    ColumnSchema,
    Environment,
    TrialDataset,
    TrialRecord,
    TwoWayTable,
    environment_index,
    parse_csv,
    serialize_csv,
    two_way_means,
)
from .mixed_model import (
    ModelCase,
    MixedModelFit,
    SignificanceTable,
    build_model,
    blup,
    degrees_of_freedom,
    fit_reml,
    predict,
    significance_table,
    test_fixed_terms,
    test_random_terms,
)
from .stability import (
    StabilityReport,
    coefficient_of_variation,
    fit_stability_glm,
    kang_ys,
    lin_binns,
    regression_stability,
    shukla,
    stability_report,
    wricke,
)
from .ammi import AmmiFit, IpcSelection, ammi_biplot_data, fit_ammi, select_components
from .gge import (
    BiplotGeometry,
    GgeFit,
    WinnerAssignment,
    biplot_geometry,
    discrimination_representativeness,
    environment_relationship,
    fit_gge,
    mean_environment_axis,
    mean_vs_stability,
    ranking,
    which_won_where,
)
from .bundle import AnalysisBundle, read_bundle, write_bundle
from .pipeline import run_all
from .fixtures import load_oats, load_watermelon

__version__ = "0.1.0"
