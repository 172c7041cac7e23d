"""Extension of differentially private mechanisms on finite metric spaces."""

from dpextend.extension import ExtensionResult, extend, extend_row, normalizer_ratio_check
from dpextend.mechanism import (
    DensityView,
    FiniteMechanism,
    PartialMechanism,
    PrivacyReport,
    density_view,
    measured_epsilon,
    randomized_response,
    restrict,
    truncated_geometric,
    verify_epsilon,
)
from dpextend.spaces import (
    HypothesisSet,
    LabeledGraph,
    MetricSpace,
    ValidationResult,
    edge_distance,
    enumerate_graphs,
    explicit_space,
    graph_space,
    hamming_space,
    node_distance,
    validate_metric,
)
from dpextend.verifier import AuditReport, audit_extension, audit_set_level, oracle_extend

__version__ = "0.1.0"
