"""Wire-protocol server exposing step generation and scoring models.

The package has no dependency on the engine it serves: the JSON protocol is
the whole contract.  `StubModel` is a deterministic stand-in; swap in a real
generator/classifier pair by implementing the same two methods.
"""

from .models import (
    StubModel,
    encode_prover_input,
    encode_verifier_input,
    next_intermediate,
)
from .server import (
    RequestError,
    clamp01,
    handle_frame,
    handle_request,
    serve_http,
    serve_stdio,
    start_http_background,
)

__version__ = "0.1.0"

__all__ = [
    "RequestError",
    "StubModel",
    "clamp01",
    "encode_prover_input",
    "encode_verifier_input",
    "handle_frame",
    "handle_request",
    "next_intermediate",
    "serve_http",
    "serve_stdio",
    "start_http_background",
    "__version__",
]
