"""Random labeled trees weighted by the product of degree factorials.

Exact formulas (``weights``, ``forests``, ``limit``), samplers, a local ball
census and a brute-force oracle for small n.
"""
from .errors import DomainError, InvalidTreeError, MalformedCodeError, ResourceLimitError
from .exact import ExactQ, LogWeight, binomial, rising_product
from .forests import (
    DecoratedForest,
    GluedForest,
    InvalidGluing,
    conditional_forest_probability,
    expected_subtree_count,
    forest_probability,
    glue,
    h_constant,
    limit_decorated_density,
)
from .trees import (
    LabeledTree,
    PruferCode,
    RootedBall,
    aut_count,
    canonical_key,
    degree_sequence,
    extract_ball,
    prufer_decode,
    prufer_encode,
)
from .weights import (
    ModelParams,
    constant_C,
    degree_sequence_probability,
    joint_degree_probability,
    max_degree_lower_tail_bound,
    max_degree_upper_tail_bound,
    product_sum_identity,
    tree_probability,
    tree_weight,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "InvalidTreeError",
    "MalformedCodeError",
    "ResourceLimitError",
    "ExactQ",
    "LogWeight",
    "binomial",
    "rising_product",
    "DecoratedForest",
    "GluedForest",
    "InvalidGluing",
    "conditional_forest_probability",
    "expected_subtree_count",
    "forest_probability",
    "glue",
    "h_constant",
    "limit_decorated_density",
    "LabeledTree",
    "PruferCode",
    "RootedBall",
    "aut_count",
    "canonical_key",
    "degree_sequence",
    "extract_ball",
    "prufer_decode",
    "prufer_encode",
    "ModelParams",
    "constant_C",
    "degree_sequence_probability",
    "joint_degree_probability",
    "max_degree_lower_tail_bound",
    "max_degree_upper_tail_bound",
    "product_sum_identity",
    "tree_probability",
    "tree_weight",
]
