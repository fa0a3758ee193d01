"""WLAN policy regimes and the request verdicts they produce.

Five historical WIFI-KNUST configurations ship as presets (``v1`` .. ``v5``),
alongside the proposed NAC + portal design (``proposed``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .net_model import SecurityMode

__all__ = [
    "Protocol", "PolicyConfig", "AccessRequest", "Verdict", "Action",
    "preset", "preset_bundle", "evaluate_request", "apply_cap", "domain_matches",
    "load_blacklist", "resolve_policy", "PRESET_NAMES",
]


class Protocol(str, Enum):
    HTTP = "HTTP"
    HTTPS = "HTTPS"
    FTP = "FTP"
    P2P = "P2P"
    DNS = "DNS"
    ICMP = "ICMP"


ALL_PROTOCOLS = frozenset(Protocol)
MAIN_SSID = "WIFI-KNUST"
SEC_SSID = "KNUST WIFI SEC"
KNUST_SITE = "knust.edu.gh"


@dataclass(frozen=True)
class PolicyConfig:
    name: str
    ssid: str = MAIN_SSID
    security_mode: SecurityMode = SecurityMode.OPEN
    domain_blacklist: frozenset[str] = frozenset()
    allowed_protocols: frozenset[Protocol] = ALL_PROTOCOLS
    redirect_target: str = ""
    bandwidth_cap: Optional[float] = None
    portal_enabled: bool = False
    session_timeout: Optional[float] = None
    nac_enabled: bool = False
    monitored: bool = False
    isolated: bool = False  # no Internet forwarding at all

    def __post_init__(self):
        object.__setattr__(self, "security_mode", SecurityMode(self.security_mode))
        object.__setattr__(self, "domain_blacklist",
                           frozenset(_norm_domain(d) for d in self.domain_blacklist))
        object.__setattr__(self, "allowed_protocols",
                           frozenset(Protocol(p) for p in self.allowed_protocols))
        if self.portal_enabled and not self.session_timeout:
            raise ValueError(f"policy {self.name}: portal requires a session_timeout")
        if self.domain_blacklist and not self.redirect_target:
            raise ValueError(f"policy {self.name}: blacklist requires a redirect_target")
        if self.bandwidth_cap is not None and self.bandwidth_cap < 0:
            raise ValueError(f"policy {self.name}: bandwidth_cap must be >= 0")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ssid": self.ssid,
            "security_mode": self.security_mode.value,
            "domain_blacklist": sorted(self.domain_blacklist),
            "allowed_protocols": [p.value for p in Protocol if p in self.allowed_protocols],
            "redirect_target": self.redirect_target,
            "bandwidth_cap": self.bandwidth_cap,
            "portal_enabled": self.portal_enabled,
            "session_timeout": self.session_timeout,
            "nac_enabled": self.nac_enabled,
            "monitored": self.monitored,
            "isolated": self.isolated,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown policy fields: {sorted(extra)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PolicyConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class AccessRequest:
    src_ip: str
    dst_domain: str
    protocol: Protocol
    timestamp: float = 0.0
    dst_ip: Optional[str] = None
    spoofed: bool = False  # source forged to dodge an ICMP redirect

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))


class Action(str, Enum):
    ALLOW = "Allow"
    REDIRECT = "Redirect"
    DENY = "Deny"


@dataclass(frozen=True)
class Verdict:
    action: Action
    target: Optional[str] = None
    reason: Optional[str] = None

    @classmethod
    def allow(cls):
        return cls(Action.ALLOW)

    @classmethod
    def redirect(cls, target: str):
        return cls(Action.REDIRECT, target=target)

    @classmethod
    def deny(cls, reason: str):
        return cls(Action.DENY, reason=reason)


def _norm_domain(d: str) -> str:
    return d.strip().lower().rstrip(".")


def domain_matches(domain: str, pattern: str) -> bool:
    """Case-insensitive suffix match on label boundaries."""
    d, p = _norm_domain(domain), _norm_domain(pattern)
    return d == p or d.endswith("." + p)


def evaluate_request(policy: PolicyConfig, req: AccessRequest) -> Verdict:
    if req.protocol not in policy.allowed_protocols:
        return Verdict.deny("ProtocolBlocked")
    if any(domain_matches(req.dst_domain, p) for p in policy.domain_blacklist):
        return Verdict.redirect(policy.redirect_target)
    return Verdict.allow()


def apply_cap(policy: PolicyConfig, computed_throughput: float) -> float:
    if computed_throughput < 0:
        raise ValueError("throughput cannot be negative")
    if policy.bandwidth_cap is None:
        return computed_throughput
    return min(computed_throughput, policy.bandwidth_cap)


def load_blacklist(path: str | Path) -> frozenset[str]:
    """Read a category file: one domain per line, ``#`` comments allowed."""
    out = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.add(_norm_domain(line))
    return frozenset(out)


_NO_FTP_P2P = frozenset({Protocol.HTTP, Protocol.HTTPS, Protocol.DNS})


def _v2(extra_blacklist: Iterable[str] = ()) -> PolicyConfig:
    return PolicyConfig(
        name="v2",
        domain_blacklist=frozenset({"youtube.com", *extra_blacklist}),
        allowed_protocols=_NO_FTP_P2P,
        redirect_target=KNUST_SITE,
    )


def _bundles(extra_blacklist: Iterable[str]) -> dict[str, tuple[PolicyConfig, ...]]:
    sec_isolated = PolicyConfig(name="v3-sec", ssid=SEC_SSID, monitored=True, isolated=True)
    return {
        "v1": (PolicyConfig(name="v1"),),
        "v2": (_v2(extra_blacklist),),
        "v3": (PolicyConfig(name="v3"), sec_isolated),
        "v4": (PolicyConfig(name="v4", portal_enabled=True, session_timeout=600.0),),
        "v5": (
            PolicyConfig(name="v5"),
            PolicyConfig(name="v5-sec", ssid=SEC_SSID, portal_enabled=True,
                         session_timeout=600.0, monitored=True),
        ),
        "proposed": (
            PolicyConfig(name="proposed", security_mode=SecurityMode.WPA2,
                         portal_enabled=True, session_timeout=3600.0,
                         nac_enabled=True, monitored=True),
        ),
    }


PRESET_NAMES = ("v1", "v2", "v3", "v4", "v5", "proposed")


def preset_bundle(version: str, extra_blacklist: Iterable[str] = ()) -> tuple[PolicyConfig, ...]:
    """Every SSID's config for a version; the main SSID comes first."""
    key = version.strip().lower()
    bundles = _bundles(extra_blacklist)
    if key not in bundles:
        raise KeyError(f"unknown policy version {version!r}; expected one of {PRESET_NAMES}")
    return bundles[key]


def preset(version: str, extra_blacklist: Iterable[str] = ()) -> PolicyConfig:
    """Main-SSID config for ``v1``..``v5`` or ``proposed``."""
    return preset_bundle(version, extra_blacklist)[0]


def resolve_policy(tag_or_doc) -> PolicyConfig:
    """Accept a PolicyConfig, a dict, or a tag such as ``v4`` / ``v5-sec``."""
    if isinstance(tag_or_doc, PolicyConfig):
        return tag_or_doc
    if isinstance(tag_or_doc, dict):
        return PolicyConfig.from_dict(tag_or_doc)
    tag = str(tag_or_doc).strip().lower()
    base, _, suffix = tag.partition("-")
    bundle = preset_bundle(base)
    if not suffix or suffix == "main":
        return bundle[0]
    for cfg in bundle:
        if cfg.name == tag:
            return cfg
    raise KeyError(f"unknown policy tag {tag_or_doc!r}")
