"""Session lifecycle: authorization, grants, and switcher provisioning."""

from .authorization import AuthServer, Credential, Directory, ResolutionError
from .manager import (
    ActiveSession,
    ClientSession,
    HopperManager,
    ManagerError,
    PendingSession,
    apply_expire,
    apply_provision,
)
from .messages import (
    AuthRequest,
    AuthResult,
    ExpireMessage,
    Handoff,
    ProvisionAck,
    ProvisionMessage,
    ServiceRecord,
    SessionGrant,
    SessionRefused,
    SessionRequest,
    WireError,
    decode,
    decode_stream,
    encode,
    uid_tag,
)

__all__ = [
    "ActiveSession", "AuthRequest", "AuthResult", "AuthServer", "ClientSession",
    "Credential", "Directory", "ExpireMessage", "Handoff", "HopperManager",
    "ManagerError", "PendingSession", "ProvisionAck", "ProvisionMessage",
    "ResolutionError", "ServiceRecord", "SessionGrant", "SessionRefused",
    "SessionRequest", "WireError", "apply_expire", "apply_provision", "decode",
    "decode_stream", "encode", "uid_tag",
]
