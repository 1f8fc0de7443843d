"""Bayesian hierarchical spatial modelling of threshold excesses on a grid."""

__version__ = "0.1.0"

from .gpd import (ExcessRecord, GpdParams, fit_mle, gpd_logpdf, gpd_quantile,  # noqa: E402
                  gpd_survival, select_threshold, threshold_stability_scan)
from .lattice import Lattice, build_lattice, build_proximity_matrix, grid_lattice  # noqa: E402
from .likelihood_adjust import adjusted_loglik, estimate_godambe_k  # noqa: E402
from .hier_mcmc import (ChainArchive, ProcessConfig, SamplerConfig,  # noqa: E402
                        default_process_config, init_state, run_chain)
from .return_levels import (posterior_return_levels, predictive_return_level,  # noqa: E402
                            return_level)
from .single_cell import compare_uncertainty, run_single_cell, run_single_cells  # noqa: E402
from .synth import SynthSpec, simulate_dataset  # noqa: E402
from .diagnostics import acceptance_summary, dic, effective_sample_size  # noqa: E402

__all__ = [
    "ExcessRecord", "GpdParams", "fit_mle", "gpd_logpdf", "gpd_quantile", "gpd_survival",
    "select_threshold", "threshold_stability_scan", "Lattice", "build_lattice",
    "build_proximity_matrix", "grid_lattice", "adjusted_loglik", "estimate_godambe_k",
    "ChainArchive", "ProcessConfig", "SamplerConfig", "default_process_config", "init_state",
    "run_chain", "posterior_return_levels", "predictive_return_level", "return_level",
    "compare_uncertainty", "run_single_cell", "run_single_cells", "SynthSpec",
    "simulate_dataset", "acceptance_summary", "dic", "effective_sample_size",
]
