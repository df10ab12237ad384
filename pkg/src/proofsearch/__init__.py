"""Proof search over verified entailment steps.

A prover proposes candidate reasoning steps, an independent verifier scores
each step's validity, and a global search assembles the proof of a
hypothesis whose weakest link is as strong as possible.
"""

from .dsl import (
    HYPOTHESIS,
    LinearProof,
    NodeId,
    NodeKind,
    StepText,
    canonicalize,
    intermediate,
    normalize_sentence,
    parse_proof,
    parse_step,
    sent,
    serialize_proof,
    structurally_equal,
)
from .errors import (
    BridgeError,
    BridgeProtocolError,
    BridgeTimeout,
    BridgeUnavailable,
    ConfigError,
    DataError,
    DomainError,
    EmptyCorpusError,
    InvalidStepError,
    NotEnoughPremisesError,
    ProofSearchError,
    ProofSyntaxError,
    ProverFailure,
    UsageError,
    VerifierFailure,
)
from .graph import (
    ExecutionOutcome,
    PartialProof,
    ProofGraph,
    ProofStep,
    node_score,
    sample_partial_proof,
)
from .tree import ProofTree
from .search import (
    JsonlTracer,
    ScoreMix,
    SearchConfig,
    SearchResult,
    generate_greedy,
    mix_scores,
    run_greedy,
    run_search,
)
from .sources import (
    Candidate,
    ExactProver,
    ExactVerifier,
    ExternalProver,
    ExternalVerifier,
    HttpTransport,
    NoisyProver,
    OracleProver,
    OracleVerifier,
    StdioTransport,
    StepScorer,
    StepSource,
)
from .synth import (
    Answer,
    DatasetConfig,
    TaskInstance,
    WorldConfig,
    generate_dataset,
    generate_world,
    make_instance,
    negate,
    read_dataset,
    write_dataset,
)
from .bm25 import Bm25Index, bm25_topk
from .negatives import (
    LabeledStep,
    Perturbation,
    extract_positives,
    make_negatives,
    read_labeled_steps,
    write_labeled_steps,
)
from .evaluation import (
    Alignment,
    AnswerClassifier,
    ExampleScores,
    InstanceOutcome,
    align_trees,
    aggregate_scores,
    breakdown_by_depth,
    score_example,
    token_f1,
)
from .wire import ProtocolFuzzer, build_generate_request, build_score_request

__version__ = "0.1.0"

__all__ = [
    "HYPOTHESIS",
    "LinearProof",
    "NodeId",
    "NodeKind",
    "StepText",
    "canonicalize",
    "intermediate",
    "normalize_sentence",
    "parse_proof",
    "parse_step",
    "sent",
    "serialize_proof",
    "structurally_equal",
    "ProofSearchError",
    "ProofSyntaxError",
    "DomainError",
    "InvalidStepError",
    "ProverFailure",
    "VerifierFailure",
    "BridgeError",
    "BridgeTimeout",
    "BridgeProtocolError",
    "BridgeUnavailable",
    "NotEnoughPremisesError",
    "EmptyCorpusError",
    "ConfigError",
    "DataError",
    "UsageError",
    "ExecutionOutcome",
    "PartialProof",
    "ProofGraph",
    "ProofStep",
    "node_score",
    "sample_partial_proof",
    "ProofTree",
    "JsonlTracer",
    "ScoreMix",
    "SearchConfig",
    "SearchResult",
    "generate_greedy",
    "mix_scores",
    "run_greedy",
    "run_search",
    "Candidate",
    "ExactProver",
    "ExactVerifier",
    "ExternalProver",
    "ExternalVerifier",
    "HttpTransport",
    "NoisyProver",
    "OracleProver",
    "OracleVerifier",
    "StdioTransport",
    "StepScorer",
    "StepSource",
    "Answer",
    "DatasetConfig",
    "TaskInstance",
    "WorldConfig",
    "generate_dataset",
    "generate_world",
    "make_instance",
    "negate",
    "read_dataset",
    "write_dataset",
    "Bm25Index",
    "bm25_topk",
    "LabeledStep",
    "Perturbation",
    "extract_positives",
    "make_negatives",
    "read_labeled_steps",
    "write_labeled_steps",
    "Alignment",
    "AnswerClassifier",
    "ExampleScores",
    "InstanceOutcome",
    "align_trees",
    "aggregate_scores",
    "breakdown_by_depth",
    "score_example",
    "token_f1",
    "ProtocolFuzzer",
    "build_generate_request",
    "build_score_request",
]
