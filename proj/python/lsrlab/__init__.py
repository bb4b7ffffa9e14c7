"""Latent-space-regularised VAEs for monophonic measures."""

from ._lsrlab import (
    Corpus,
    LsrlabError,
    Measure,
    Model,
    __version__,
    compute_attributes,
    config_digest,
    cosine_similarity,
    load_corpus,
    mu_law_bins,
    parse_measure,
    preset_config,
    read_reports,
    reconstruction_accuracy,
    run_single,
    spearman,
    split_corpus,
    synthetic_corpus,
)

__all__ = [
    "Corpus",
    "LsrlabError",
    "Measure",
    "Model",
    "__version__",
    "compute_attributes",
    "config_digest",
    "cosine_similarity",
    "load_corpus",
    "mu_law_bins",
    "parse_measure",
    "preset_config",
    "read_reports",
    "reconstruction_accuracy",
    "run_single",
    "spearman",
    "split_corpus",
    "synthetic_corpus",
]
