"""Name resolution and client authorization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from ..hopper_core import IpAddress
from .messages import AuthRequest, AuthResult, Handoff, ServiceRecord


class ResolutionError(LookupError):
    pass


class Directory:
    """DNS stand-in: every registered service name points at the
    authorization server, never at the service itself."""

    def __init__(self, auth_ip: IpAddress, services: Iterable[ServiceRecord] = ()):
        self.auth_ip = auth_ip
        self._names: set[str] = set()
        for s in services:
            self.register(s)

    def register(self, service: ServiceRecord) -> None:
        self._names.add(service.service_name)

    def resolve(self, service_name: str) -> IpAddress:
        if service_name not in self._names:
            raise ResolutionError(f"unknown service {service_name!r}")
        return self.auth_ip


@dataclass
class Credential:
    secret: bytes
    services: Optional[frozenset[str]] = None  # None: any service

    def allows(self, service_name: str) -> bool:
        return self.services is None or service_name in self.services


@dataclass
class AuthServer:
    """Static credential table check, then hand-off to the hopper manager."""

    services: Mapping[str, ServiceRecord]
    credentials: list[Credential] = field(default_factory=list)
    manager_ip: Optional[IpAddress] = None

    def authorize(self, request: AuthRequest) -> tuple[AuthResult, Optional[Handoff]]:
        """Returns the client-facing result and, on acceptance, the hand-off
        record for the manager."""

        def reject(reason: str):
            return AuthResult(request.client_ip, request.service_name, False, reason), None

        service = self.services.get(request.service_name)
        if service is None:
            return reject("unknown service")
        if not service.subscribed:
            return reject("service not subscribed")
        if not any(c.secret == request.credentials and c.allows(request.service_name)
                   for c in self.credentials):
            return reject("bad credentials")
        result = AuthResult(request.client_ip, request.service_name, True,
                            manager_ip=self.manager_ip)
        return result, Handoff(request.client_ip, request.service_name)
