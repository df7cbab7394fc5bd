"""Numerical verification of quasi-isometric embeddings between contact metric manifolds."""
from .expr import parse, evaluate, differentiate, simplify, to_text
from .manifold import ChartManifold, Interval, metric_at, orthonormal_frame, sample_points, sample_vectors
from .curvature import curvature_at, derived_tensor, flatness_test, einstein_fit
from .structure import (ContactStructure, verify_axioms, verify_contact, classify_nk, verify_sasakian,
                        check_structure_preserving)
from .qisom import (Embedding, pushforward_at, make_samples, check_embedding, estimate_constants,
                    best_constants, check_quasi_dense, check_theorem, THEOREM_IDS)
from .reports import CheckReport, Hypothesis
from .definitions import parse_definitions, format_definitions, load_file

__version__ = "0.1.0"

__all__ = [
    "parse", "evaluate", "differentiate", "simplify", "to_text",
    "ChartManifold", "Interval", "metric_at", "orthonormal_frame", "sample_points", "sample_vectors",
    "curvature_at", "derived_tensor", "flatness_test", "einstein_fit",
    "ContactStructure", "verify_axioms", "verify_contact", "classify_nk", "verify_sasakian",
    "check_structure_preserving",
    "Embedding", "pushforward_at", "make_samples", "check_embedding", "estimate_constants",
    "best_constants", "check_quasi_dense", "check_theorem", "THEOREM_IDS",
    "CheckReport", "Hypothesis", "parse_definitions", "format_definitions", "load_file",
]
