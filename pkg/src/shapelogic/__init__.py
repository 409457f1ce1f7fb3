"""Rule-based detection of straight-edged shapes in grayscale images.

Shapes are described as Prolog-style clauses over three spatial predicates
(``line``, ``angle`` and ``len``) and searched for on a grid of candidate
points; the best-scoring bindings are returned as detections.
"""

from importlib import resources

from .dsl import RuleError, RuleSet, parse, parse_query, pretty_print, validate_recursion
from .geometry import DegenerateGeometryError, LineParams, angle, histogram, length, line, rect_pixels
from .raster import GrayImage, PGMError, Point, dump_pgm, load_pgm, pixel, read_pgm, write_pgm
from .solver import (
    CandidateConfig, Detection, Detections, ScoreWeights, SearchLimits, SolverContext,
    UnknownPredicateError, bound_and_prune, candidate_points, generative_candidates, score, solve,
)
from .synth import RectShape, SceneError, SynthScene, parse_scene, render

__all__ = [
    "CandidateConfig", "DegenerateGeometryError", "Detection", "Detections", "GrayImage",
    "LineParams", "PGMError", "Point", "RectShape", "RuleError", "RuleSet", "SceneError",
    "ScoreWeights", "SearchLimits", "SolverContext", "SynthScene", "UnknownPredicateError",
    "angle", "bound_and_prune", "bundled_rules", "candidate_points", "dump_pgm",
    "generative_candidates", "histogram", "length", "line", "load_pgm", "parse", "parse_query",
    "parse_scene", "pixel", "pretty_print", "read_pgm", "rect_pixels", "render", "score", "solve",
    "validate_recursion", "write_pgm",
]


def bundled_rules(name: str) -> str:
    """Source text of a rule file shipped with the package, e.g. ``"house"``."""
    return resources.files(__package__).joinpath("rules", f"{name}.slr").read_text(encoding="utf-8")
