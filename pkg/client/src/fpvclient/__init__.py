"""Client adapter and toy trackers for the fpvbench wire protocol.

Implement `init(frame_ref, box)` and `update(frame_ref) -> box` on any
object and pass it to `serve()`; the adapter handles the handshake and
all message framing.
"""

from fpvclient.adapter import PROTOCOL_VERSION, Box, ClientError, serve
from fpvclient.trackers import (
    TRACKERS,
    CenterBoxTracker,
    EchoTracker,
    TemplateTracker,
)

__version__ = "0.1.0"

__all__ = [
    "PROTOCOL_VERSION",
    "Box",
    "ClientError",
    "serve",
    "TRACKERS",
    "EchoTracker",
    "CenterBoxTracker",
    "TemplateTracker",
    "__version__",
]
