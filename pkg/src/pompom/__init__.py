"""Turn non-adaptive constant-query testers into sample-based testers."""

__version__ = "0.1.0"

from .core import Alphabet, PartialPropertyPair, Property, distance_to_property, hamming_distance, restrict, substitute
from .errors import CapExceededError, HypothesisError, InfiniteDistanceError, PompomError, ValidationError
from .formula import Constraint, ProbFormula, TestDeclaration, condition, is_valid_test, satisfaction, sureness
from .sampler import SampleTester, compute_sampling_rate, draw_sample, synthesize_two_sided_sampler
from .structures import build_scm, find_constellation, verify_constellation

__all__ = [
    "Alphabet",
    "CapExceededError",
    "Constraint",
    "HypothesisError",
    "InfiniteDistanceError",
    "PartialPropertyPair",
    "PompomError",
    "ProbFormula",
    "Property",
    "SampleTester",
    "TestDeclaration",
    "ValidationError",
    "build_scm",
    "compute_sampling_rate",
    "condition",
    "distance_to_property",
    "draw_sample",
    "find_constellation",
    "hamming_distance",
    "is_valid_test",
    "restrict",
    "satisfaction",
    "substitute",
    "sureness",
    "synthesize_two_sided_sampler",
    "verify_constellation",
]
