"""Exception taxonomy for the whole package.

Grouped by the layer that raises them; everything inherits from
ProofSearchError so callers can catch broadly.
"""

from __future__ import annotations


class ProofSearchError(Exception):
    """Base class for all package errors."""


# --- proof text parsing ---------------------------------------------------


class ProofSyntaxError(ProofSearchError, ValueError):
    """Malformed proof text: bad tokens, missing arrow, empty conclusion."""


class UnknownPremiseError(ProofSyntaxError):
    """A premise references a sentence that is not available at that point."""


class DuplicateConclusionError(ProofSyntaxError):
    """Two steps conclude the same identifier."""


class EmptyProofError(ProofSyntaxError):
    """Proof text contains no steps."""


# --- graph ----------------------------------------------------------------


class DomainError(ProofSearchError, ValueError):
    """A score is outside [0, 1] or not finite."""


class InvalidStepError(ProofSearchError, ValueError):
    """A step cannot be applied to the graph (unknown premise sentence,
    conclusion duplicating a premise or a given fact)."""


class NoProofError(ProofSearchError):
    """No step concludes the hypothesis, so there is nothing to extract."""


# --- step sources and the wire bridge -------------------------------------


class ProverFailure(ProofSearchError):
    """Candidate generation failed; search aborts with its best result."""


class VerifierFailure(ProofSearchError):
    """Step scoring failed; search aborts with its best result."""


class BridgeError(ProofSearchError):
    """Base class for external model bridge failures."""


class BridgeTimeout(BridgeError):
    """The bridge did not answer within the configured timeout."""


class BridgeProtocolError(BridgeError):
    """The bridge answered with malformed JSON or an out-of-range score."""


class BridgeUnavailable(BridgeError):
    """The bridge process or endpoint cannot be reached."""


# --- training data generation ----------------------------------------------


class NotEnoughPremisesError(ProofSearchError, ValueError):
    """Premise removal was requested on a single-premise step."""


class EmptyCorpusError(ProofSearchError, ValueError):
    """A retrieval index has no usable documents."""


# --- synthetic task generation ---------------------------------------------


class ConfigError(ProofSearchError, ValueError):
    """Impossible or inconsistent generation parameters."""


class DepthUnreachableError(ProofSearchError, ValueError):
    """The world cannot support an instance of the requested depth."""


# --- datasets and CLI -------------------------------------------------------


class DataError(ProofSearchError, ValueError):
    """A dataset or prediction file does not match the expected schema."""


class UsageError(ProofSearchError, ValueError):
    """Bad command line arguments or config file keys."""
