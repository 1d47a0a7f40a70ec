"""Data-plane core of IP fast hopping: the keyed hop function plus the
client and edge-switcher packet rewrites."""

from .batch import hop_indices, matches
from .hop import (
    SwitcherSession,
    SwitcherState,
    client_rewrite_inbound,
    client_rewrite_outbound,
    hop_index,
    switcher_rewrite_response,
    switcher_verify,
    virtual_address,
)
from .siphash import siphash24
from .types import (
    ConfigurationError,
    Drop,
    DropReason,
    Forward,
    HopError,
    IpAddress,
    IpPool,
    MissingTimestamp,
    Packet,
    SessionConfig,
    SessionUid,
    SourceMismatch,
    VerifyOutcome,
)

__all__ = [
    "ConfigurationError", "Drop", "DropReason", "Forward", "HopError",
    "IpAddress", "IpPool", "MissingTimestamp", "Packet", "SessionConfig",
    "SessionUid", "SourceMismatch", "SwitcherSession", "SwitcherState",
    "VerifyOutcome", "client_rewrite_inbound", "client_rewrite_outbound",
    "hop_index", "hop_indices", "matches", "siphash24",
    "switcher_rewrite_response", "switcher_verify", "virtual_address",
]
