"""Network model selection from graph-Laplacian spectra.

Simulate candidate network models, extract Laplacian eigenvalue vectors,
train a classifier over the spectra, and score an observed network against
every candidate with normalized propensity scores as a relative measure of
goodness-of-fit.
"""

from .classify import (FeatureConfig, ScoreVector, build_features,
                       load_classifier, normalize_scores, predict_scores,
                       save_classifier, train)
from .graphs import (Graph, connected_components, degrees, directed_laplacian,
                     incidence, laplacian, permute, read_edgelist,
                     write_edgelist)
from .harness import (RateEstimate, StudyConfig, emit_outputs,
                      run_replications, run_study, wilson_interval)
from .models import (Bernoulli, DirectedDyad, GwespErgm, LpmBilinear,
                     LpmEuclidean, McmcConfig, ModelSpec, Sbm, gwesp_change,
                     gwesp_statistic, gwesp_weight, sample, sp_count,
                     spec_from_json, spec_to_json)
from .pipeline import SelectionReport, select_model
from .spectra import Spectrum, eigenvalues_symmetric, spectrum, zero_multiplicity

__version__ = "0.1.0"

__all__ = [
    "Bernoulli", "DirectedDyad", "FeatureConfig", "Graph", "GwespErgm",
    "LpmBilinear", "LpmEuclidean", "McmcConfig", "ModelSpec", "RateEstimate",
    "Sbm", "ScoreVector", "SelectionReport", "Spectrum", "StudyConfig",
    "build_features", "connected_components", "degrees", "directed_laplacian",
    "eigenvalues_symmetric", "emit_outputs", "gwesp_change", "gwesp_statistic",
    "gwesp_weight", "incidence", "laplacian", "load_classifier",
    "normalize_scores", "permute", "predict_scores", "read_edgelist",
    "run_replications", "run_study", "sample", "save_classifier",
    "select_model", "sp_count", "spec_from_json", "spec_to_json", "spectrum",
    "train", "wilson_interval", "write_edgelist", "zero_multiplicity",
]
