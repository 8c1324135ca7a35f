"""Spectral localizer toolkit for topological semimetals.

Builds spectral localizers for periodic tight-binding Hamiltonians and
continuum Weyl/Dirac operators, and extracts topological data from their
low-lying spectrum: Weyl/Dirac point counts, local charges, half-signature
invariants, spectral flow under mass terms, and Callias-type indices.
"""

from speclocal.lattice_model import (
    HoppingTerm,
    TightBindingModel,
    WeylPointReport,
    model_from_hoppings,
    builtin_model,
    find_fermi_points,
    linearize_at,
    charge_of,
)
from speclocal.localizer import (
    AssembledLocalizer,
    DisorderSpec,
    LocalizerConfig,
    MassTermSpec,
    TuningReport,
    assemble,
    add_disorder,
    add_mass_term,
    check_tuning_bounds,
    continuum_dirac_localizer,
    continuum_weyl_localizer,
    default_rho,
    export_coo,
    graded_clifford_rep,
    import_coo,
    split_blocks,
)
from speclocal.topo import (
    ChernResult,
    GaplessSampleError,
    InvariantMismatchError,
    QuadratureError,
    chern_even_bz,
    chern_even_bz_riemann,
    chern_integral_dirac,
    chern_integral_weyl,
    chern_odd_bz,
    chiral_block_sampler,
    dirac_integral_closed_form,
    flat_band_sampler,
    invariant_report_csv,
    local_charge,
    mass_term_chern_jump,
    nn_sum,
    weyl_integral_closed_form,
)
from speclocal.cli import (
    ConfigError,
    Scenario,
    parse_config,
    run_scenario,
    serialize_scenario,
)
from speclocal.spectra import (
    CalliasReport,
    ClusterReport,
    ClusterWarning,
    ConvergenceError,
    EigenWindow,
    InertiaTriple,
    SpectralGapError,
    callias_kernel,
    count_cluster,
    eig_window,
    eigen_report_csv,
    half_signature_chern,
    inertia,
    j_signature_on_kernel,
    signature,
    spectral_flow,
    zero_tolerance,
)

__version__ = "0.1.0"

__all__ = [
    "HoppingTerm",
    "TightBindingModel",
    "WeylPointReport",
    "model_from_hoppings",
    "builtin_model",
    "find_fermi_points",
    "linearize_at",
    "charge_of",
    "AssembledLocalizer",
    "DisorderSpec",
    "LocalizerConfig",
    "MassTermSpec",
    "TuningReport",
    "assemble",
    "add_disorder",
    "add_mass_term",
    "check_tuning_bounds",
    "continuum_dirac_localizer",
    "continuum_weyl_localizer",
    "default_rho",
    "export_coo",
    "graded_clifford_rep",
    "import_coo",
    "split_blocks",
    "CalliasReport",
    "ClusterReport",
    "ClusterWarning",
    "ConvergenceError",
    "EigenWindow",
    "InertiaTriple",
    "SpectralGapError",
    "callias_kernel",
    "count_cluster",
    "eig_window",
    "eigen_report_csv",
    "half_signature_chern",
    "inertia",
    "j_signature_on_kernel",
    "signature",
    "spectral_flow",
    "zero_tolerance",
    "ChernResult",
    "GaplessSampleError",
    "InvariantMismatchError",
    "QuadratureError",
    "chern_even_bz",
    "chern_even_bz_riemann",
    "chern_integral_dirac",
    "chern_integral_weyl",
    "chern_odd_bz",
    "chiral_block_sampler",
    "dirac_integral_closed_form",
    "flat_band_sampler",
    "invariant_report_csv",
    "local_charge",
    "mass_term_chern_jump",
    "nn_sum",
    "weyl_integral_closed_form",
    "ConfigError",
    "Scenario",
    "parse_config",
    "run_scenario",
    "serialize_scenario",
    "__version__",
]
