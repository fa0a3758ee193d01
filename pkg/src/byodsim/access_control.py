"""Device registry, posture assessment, NAC gating and device-bound certificates.

Timestamps are seconds on the simulated clock; calendar dates carried by
devices (antivirus definitions, OS release) are placed on that clock relative
to :data:`SIM_EPOCH`.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .audit import AccessLevel, AuditLog, EventKind, What
from .net_model import AntivirusInfo, ClientDevice, Driver, OsInfo, normalize_mac

__all__ = [
    "SIM_EPOCH", "sim_seconds", "DeviceStatus", "Deficiency", "PostureRules", "PostureResult",
    "DeviceRecord", "Registry", "Certificate", "CertVerdict",
    "DeviceLimitReached", "MacAlreadyRegistered", "UnknownOwner", "NotFound", "NotOwner",
    "NotCleared", "device_fingerprint", "issue_certificate", "verify_certificate",
    "verify_serialized", "assess_posture", "nac_gate",
]

SIM_EPOCH = datetime(2015, 11, 1, tzinfo=timezone.utc)
DAY = 86400.0
DEFAULT_DEVICE_LIMIT = 3


def sim_seconds(d: date) -> float:
    """Place a calendar date (midnight UTC) on the simulated clock."""
    dt = datetime(d.year, d.month, d.day, tzinfo=timezone.utc)
    return (dt - SIM_EPOCH).total_seconds()


class DeviceLimitReached(RuntimeError):
    pass


class MacAlreadyRegistered(RuntimeError):
    pass


class UnknownOwner(KeyError):
    pass


class NotFound(KeyError):
    pass


class NotOwner(PermissionError):
    pass


class NotCleared(PermissionError):
    pass


class DeviceStatus(str, Enum):
    UNASSESSED = "Unassessed"
    BLOCKED = "Blocked"
    CLEARED = "Cleared"


_ALLOWED_TRANSITIONS = {
    DeviceStatus.UNASSESSED: {DeviceStatus.BLOCKED, DeviceStatus.CLEARED},
    DeviceStatus.BLOCKED: {DeviceStatus.BLOCKED, DeviceStatus.CLEARED},
    DeviceStatus.CLEARED: {DeviceStatus.BLOCKED, DeviceStatus.CLEARED},
}


class Deficiency(str, Enum):
    OUTDATED_ANTIVIRUS = "OutdatedAntivirus"
    MISSING_ANTIVIRUS = "MissingAntivirus"
    DISCONTINUED_OS = "DiscontinuedOS"
    BANNED_DRIVER = "BannedDriver"


@dataclass(frozen=True)
class PostureRules:
    max_av_definition_age: float = 30.0  # days
    discontinued_os: frozenset[tuple[str, str]] = frozenset()
    banned_drivers: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self):
        if not self.max_av_definition_age > 0:
            raise ValueError("max_av_definition_age must be > 0")
        object.__setattr__(self, "discontinued_os",
                           frozenset((n.lower(), v.lower()) for n, v in self.discontinued_os))
        object.__setattr__(self, "banned_drivers",
                           frozenset((n.lower(), v.lower()) for n, v in self.banned_drivers))


@dataclass(frozen=True)
class PostureResult:
    status: DeviceStatus
    deficiencies: tuple[Deficiency, ...] = ()

    @property
    def cleared(self) -> bool:
        return self.status is DeviceStatus.CLEARED


@dataclass(frozen=True)
class IpSighting:
    address: str
    first_seen: float
    last_seen: float


@dataclass
class DeviceRecord:
    device: ClientDevice
    owner: str
    registered_at: float
    status: DeviceStatus = DeviceStatus.UNASSESSED
    deficiencies: tuple[Deficiency, ...] = ()
    ip_history: list[IpSighting] = field(default_factory=list)

    def set_status(self, result: PostureResult) -> None:
        if result.status not in _ALLOWED_TRANSITIONS[self.status]:
            raise ValueError(f"illegal status transition {self.status.value} -> {result.status.value}")
        self.status = result.status
        self.deficiencies = result.deficiencies

    def record_ip(self, address: str, now: float) -> None:
        if self.ip_history and now < self.ip_history[-1].last_seen:
            raise ValueError("ip_history must stay time-ordered")
        if self.ip_history and self.ip_history[-1].address == address:
            last = self.ip_history[-1]
            self.ip_history[-1] = replace(last, last_seen=now)
        else:
            self.ip_history.append(IpSighting(address, now, now))


def assess_posture(record: DeviceRecord, rules: PostureRules, now: float) -> PostureResult:
    """Check ``record`` against ``rules``; every violation is listed. Updates status."""
    dev = record.device
    found: list[Deficiency] = []
    if dev.antivirus is None:
        found.append(Deficiency.MISSING_ANTIVIRUS)
    elif (now - sim_seconds(dev.antivirus.definitions_date)) / DAY > rules.max_av_definition_age:
        found.append(Deficiency.OUTDATED_ANTIVIRUS)
    if (dev.os.name.lower(), dev.os.version.lower()) in rules.discontinued_os:
        found.append(Deficiency.DISCONTINUED_OS)
    if any((d.vendor.lower(), d.version.lower()) in rules.banned_drivers for d in dev.drivers):
        found.append(Deficiency.BANNED_DRIVER)
    result = PostureResult(DeviceStatus.BLOCKED if found else DeviceStatus.CLEARED, tuple(found))
    record.set_status(result)
    return result


def nac_gate(record: DeviceRecord) -> AccessLevel:
    """Anything short of Cleared is confined to DHCP and DNS-to-portal traffic."""
    if record.status is DeviceStatus.CLEARED:
        return AccessLevel.FULL_PIPELINE
    return AccessLevel.NETWORK_ONLY


# --- certificates -----------------------------------------------------------

_FP_DOMAIN = b"byodsim/device-fingerprint/v1\x00"


def device_fingerprint(mac: str, imei: str) -> str:
    payload = _FP_DOMAIN + normalize_mac(mac).encode() + b"\x00" + imei.strip().encode()
    return hashlib.sha256(payload).hexdigest()


class CertVerdict(str, Enum):
    VALID = "Valid"
    EXPIRED = "Expired"
    WRONG_DEVICE = "WrongDevice"
    FORGED = "Forged"
    REVOKED = "Revoked"


@dataclass(frozen=True)
class Certificate:
    device_fingerprint: str
    issued_at: float
    expires_at: float
    tag: bytes

    def signed_fields(self) -> dict:
        return {
            "device_fingerprint": self.device_fingerprint,
            "expires_at": self.expires_at,
            "issued_at": self.issued_at,
        }

    def serialize(self) -> str:
        doc = self.signed_fields()
        doc["tag"] = base64.b64encode(self.tag).decode("ascii")
        return _canonical(doc)

    @classmethod
    def deserialize(cls, text: str | bytes) -> "Certificate":
        """Parse the canonical form. Anything non-canonical raises ValueError."""
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        doc = json.loads(text)
        if not isinstance(doc, dict) or set(doc) != {"device_fingerprint", "expires_at", "issued_at", "tag"}:
            raise ValueError("malformed certificate")
        tag = base64.b64decode(doc["tag"], validate=True)
        cert = cls(doc["device_fingerprint"], doc["issued_at"], doc["expires_at"], tag)
        if cert.serialize() != text:
            raise ValueError("certificate is not in canonical form")
        return cert


def _canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def _tag(key: bytes, fields: dict) -> bytes:
    return hmac.new(key, _canonical(fields).encode("utf-8"), hashlib.sha256).digest()


def issue_certificate(record: DeviceRecord, key: bytes, validity: float, now: float) -> Certificate:
    if record.status is not DeviceStatus.CLEARED:
        raise NotCleared(f"device {record.device.device_id} is {record.status.value}")
    if validity <= 0:
        raise ValueError("validity must be positive")
    fp = device_fingerprint(record.device.mac, record.device.serial_imei)
    unsigned = Certificate(fp, now, now + validity, b"")
    return replace(unsigned, tag=_tag(key, unsigned.signed_fields()))


def verify_certificate(cert: Certificate, presenting_mac: str, presenting_imei: str,
                       key: bytes, now: float, revoked: Iterable[str] = ()) -> CertVerdict:
    if not (isinstance(cert.tag, bytes)
            and hmac.compare_digest(cert.tag, _tag(key, cert.signed_fields()))):
        return CertVerdict.FORGED
    if cert.device_fingerprint in set(revoked):
        return CertVerdict.REVOKED
    if now > cert.expires_at:
        return CertVerdict.EXPIRED
    if device_fingerprint(presenting_mac, presenting_imei) != cert.device_fingerprint:
        return CertVerdict.WRONG_DEVICE
    return CertVerdict.VALID


def verify_serialized(blob: str | bytes, presenting_mac: str, presenting_imei: str,
                      key: bytes, now: float, revoked: Iterable[str] = ()) -> CertVerdict:
    """Like :func:`verify_certificate` but for wire bytes; unparseable input is Forged."""
    try:
        cert = Certificate.deserialize(blob)
    except (ValueError, TypeError, UnicodeDecodeError):
        return CertVerdict.FORGED
    return verify_certificate(cert, presenting_mac, presenting_imei, key, now, revoked)


# --- registry ---------------------------------------------------------------

class Registry:
    """MDM registry: owners, their devices, and the certificate revocation list.

    Mutations are not locked; the owner of the registry serializes them.
    Every status change is written to ``audit`` when one is attached.
    """

    def __init__(self, owners: Iterable[str] = (), *, key: bytes = b"",
                 device_limit: int = DEFAULT_DEVICE_LIMIT, audit: Optional[AuditLog] = None,
                 rules: PostureRules = PostureRules()):
        self.owners = set(owners)
        self.key = key
        self.device_limit = device_limit
        self.audit = audit
        self.rules = rules
        self.records: dict[str, DeviceRecord] = {}  # by MAC
        self.revoked: set[str] = set()

    def _emit(self, event, now, record: DeviceRecord, **kw):
        if self.audit is not None:
            dev = record.device
            ip = record.ip_history[-1].address if record.ip_history else None
            self.audit.append(event, now, who=record.owner,
                              what=What(dev.device_id, dev.mac, ip), **kw)

    def devices_of(self, owner: str) -> list[DeviceRecord]:
        return [r for r in self.records.values() if r.owner == owner]

    def lookup(self, mac: str) -> Optional[DeviceRecord]:
        return self.records.get(normalize_mac(mac))

    def register_device(self, owner: str, device: ClientDevice, now: float = 0.0) -> DeviceRecord:
        if owner not in self.owners:
            raise UnknownOwner(owner)
        existing = self.records.get(device.mac)
        if existing is not None:
            if existing.owner != owner:
                raise MacAlreadyRegistered(device.mac)
            return existing
        if len(self.devices_of(owner)) >= self.device_limit:
            raise DeviceLimitReached(f"{owner} already has {self.device_limit} devices")
        record = DeviceRecord(device=device, owner=owner, registered_at=now)
        self.records[device.mac] = record
        # a re-registered device starts clean
        self.revoked.discard(device_fingerprint(device.mac, device.serial_imei))
        self._emit(EventKind.REGISTER, now, record)
        return record

    def remove_device(self, owner: str, device_id: str, now: float = 0.0) -> str:
        record = next((r for r in self.records.values()
                       if device_id in (r.device.device_id, r.device.mac)), None)
        if record is None:
            raise NotFound(device_id)
        if record.owner != owner:
            raise NotOwner(f"{device_id} belongs to another user")
        del self.records[record.device.mac]
        self.revoked.add(device_fingerprint(record.device.mac, record.device.serial_imei))
        self._emit(EventKind.DEREGISTER, now, record)
        return record.device.device_id

    def assess(self, record: DeviceRecord, now: float, rules: Optional[PostureRules] = None) -> PostureResult:
        result = assess_posture(record, rules or self.rules, now)
        if result.cleared:
            self._emit(EventKind.POSTURE_CLEAR, now, record, access_level=AccessLevel.FULL_PIPELINE)
        else:
            self._emit(EventKind.POSTURE_BLOCK, now, record, access_level=AccessLevel.NETWORK_ONLY,
                       detail={"deficiencies": [d.value for d in result.deficiencies]})
        return result

    def issue(self, record: DeviceRecord, validity: float, now: float) -> Certificate:
        cert = issue_certificate(record, self.key, validity, now)
        self._emit(EventKind.CERT_ISSUE, now, record, detail={"fingerprint": cert.device_fingerprint})
        return cert

    def verify(self, cert: Certificate, mac: str, imei: str, now: float,
               ip: Optional[str] = None, where: Optional[str] = None) -> CertVerdict:
        verdict = verify_certificate(cert, mac, imei, self.key, now, self.revoked)
        if self.audit is not None:
            mac = normalize_mac(mac)
            rec = self.records.get(mac)
            event = EventKind.CERT_OK if verdict is CertVerdict.VALID else EventKind.CERT_REJECT
            self.audit.append(event, now, who=rec.owner if rec else None,
                              what=What(rec.device.device_id if rec else mac, mac, ip), where=where,
                              detail={"fingerprint": cert.device_fingerprint, "verdict": verdict.value})
        return verdict

    # persistence

    def to_dict(self) -> dict:
        return {
            "owners": sorted(self.owners),
            "device_limit": self.device_limit,
            "records": [_record_to_dict(r) for r in sorted(self.records.values(), key=lambda r: r.device.mac)],
            "revoked": sorted(self.revoked),
        }

    @classmethod
    def from_dict(cls, doc: dict, *, key: bytes = b"", audit: Optional[AuditLog] = None) -> "Registry":
        reg = cls(doc.get("owners", ()), key=key,
                  device_limit=doc.get("device_limit", DEFAULT_DEVICE_LIMIT), audit=audit)
        for rd in doc.get("records", []):
            rec = _record_from_dict(rd)
            reg.records[rec.device.mac] = rec
        reg.revoked = set(doc.get("revoked", []))
        return reg

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    def save_revocations(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(sorted(self.revoked)), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, **kw) -> "Registry":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")), **kw)


def _iso(d: Optional[date]) -> Optional[str]:
    return d.isoformat() if d else None


def _date(s: Optional[str]) -> Optional[date]:
    return date.fromisoformat(s) if s else None


def device_to_dict(dev: ClientDevice) -> dict:
    return {
        "device_id": dev.device_id, "mac": dev.mac, "name": dev.name, "model": dev.model,
        "serial_imei": dev.serial_imei, "manufacturer": dev.manufacturer,
        "manufacture_date": _iso(dev.manufacture_date),
        "os": {"name": dev.os.name, "version": dev.os.version, "date": _iso(dev.os.date)},
        "ip_support": dev.ip_support.value,
        "wifi_tech": sorted(dev.wifi_tech),
        "antivirus": None if dev.antivirus is None else {
            "product": dev.antivirus.product, "version": dev.antivirus.version,
            "definitions_date": _iso(dev.antivirus.definitions_date)},
        "drivers": [{"vendor": d.vendor, "version": d.version} for d in dev.drivers],
    }


def device_from_dict(d: dict) -> ClientDevice:
    av = d.get("antivirus")
    os_ = d.get("os") or {}
    return ClientDevice(
        mac=d["mac"], device_id=d.get("device_id", ""), name=d.get("name", ""),
        model=d.get("model", ""), serial_imei=d.get("serial_imei", ""),
        manufacturer=d.get("manufacturer", ""), manufacture_date=_date(d.get("manufacture_date")),
        os=OsInfo(os_.get("name", "unknown"), os_.get("version", ""), _date(os_.get("date"))),
        ip_support=d.get("ip_support", "V4Only"),
        wifi_tech=frozenset(d.get("wifi_tech", ["802.11n"])),
        antivirus=None if av is None else AntivirusInfo(av["product"], av["version"],
                                                        _date(av["definitions_date"])),
        drivers=tuple(Driver(x["vendor"], x["version"]) for x in d.get("drivers", [])),
    )


def _record_to_dict(r: DeviceRecord) -> dict:
    return {
        "device": device_to_dict(r.device), "owner": r.owner, "registered_at": r.registered_at,
        "status": r.status.value, "deficiencies": [d.value for d in r.deficiencies],
        "ip_history": [{"address": s.address, "first_seen": s.first_seen, "last_seen": s.last_seen}
                       for s in r.ip_history],
    }


def _record_from_dict(d: dict) -> DeviceRecord:
    return DeviceRecord(
        device=device_from_dict(d["device"]), owner=d["owner"], registered_at=d["registered_at"],
        status=DeviceStatus(d["status"]),
        deficiencies=tuple(Deficiency(x) for x in d.get("deficiencies", [])),
        ip_history=[IpSighting(s["address"], s["first_seen"], s["last_seen"]) for s in d.get("ip_history", [])],
    )
