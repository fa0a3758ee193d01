"""Append-only audit log keyed by who / what / where / when / access level.

Records live in memory and, when a path is given, in a JSON-lines file that
is flushed before :meth:`AuditLog.append` returns.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

logger = logging.getLogger(__name__)

__all__ = [
    "EventKind", "AccessLevel", "What", "Traffic", "AuditRecord", "AuditLog",
    "AuditFilter", "SuspicionFlag", "SuspicionKind", "StorageFailure",
    "detect_suspicion",
]


class EventKind(str, Enum):
    CONNECT = "Connect"
    DISCONNECT = "Disconnect"
    DHCP_LEASE = "DhcpLease"
    LOGIN_OK = "LoginOk"
    LOGIN_FAIL = "LoginFail"
    SESSION_EXPIRE = "SessionExpire"
    LOGOUT = "Logout"
    POSTURE_BLOCK = "PostureBlock"
    POSTURE_CLEAR = "PostureClear"
    CERT_ISSUE = "CertIssue"
    CERT_OK = "CertOk"
    CERT_REJECT = "CertReject"
    POLICY_DENY = "PolicyDeny"
    REDIRECT = "Redirect"
    REGISTER = "Register"
    DEREGISTER = "Deregister"


class AccessLevel(str, Enum):
    NETWORK_ONLY = "NetworkOnly"
    FULL_PIPELINE = "FullPipeline"


class StorageFailure(OSError):
    pass


@dataclass(frozen=True)
class What:
    device_id: Optional[str] = None
    mac: Optional[str] = None
    ip: Optional[str] = None


@dataclass(frozen=True)
class Traffic:
    bytes_up: int = 0
    bytes_down: int = 0


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    when: float
    event: EventKind
    who: Optional[str] = None
    what: What = What()
    where: Optional[str] = None
    access_level: Optional[AccessLevel] = None
    traffic: Optional[Traffic] = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "event", EventKind(self.event))
        if self.access_level is not None:
            object.__setattr__(self, "access_level", AccessLevel(self.access_level))
        if self.event is EventKind.LOGIN_OK and not self.who:
            raise ValueError("LoginOk records must name the user")

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "when": self.when,
            "who": self.who,
            "what": {"device_id": self.what.device_id, "mac": self.what.mac, "ip": self.what.ip},
            "where": self.where,
            "event": self.event.value,
            "access_level": self.access_level.value if self.access_level else None,
            "traffic": ({"bytes_up": self.traffic.bytes_up, "bytes_down": self.traffic.bytes_down}
                        if self.traffic else None),
            "detail": self.detail,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "AuditRecord":
        what = d.get("what") or {}
        traffic = d.get("traffic")
        return cls(
            seq=int(d["seq"]), when=d["when"], event=d["event"], who=d.get("who"),
            what=What(what.get("device_id"), what.get("mac"), what.get("ip")),
            where=d.get("where"), access_level=d.get("access_level"),
            traffic=Traffic(traffic["bytes_up"], traffic["bytes_down"]) if traffic else None,
            detail=d.get("detail") or {},
        )


@dataclass(frozen=True)
class AuditFilter:
    who: Optional[str] = None
    device: Optional[str] = None  # device id or MAC
    where: Optional[str] = None
    since: Optional[float] = None
    until: Optional[float] = None
    events: Optional[frozenset[EventKind]] = None

    def matches(self, r: AuditRecord) -> bool:
        if self.who is not None and r.who != self.who:
            return False
        if self.device is not None and self.device not in (r.what.device_id, r.what.mac):
            return False
        if self.where is not None and r.where != self.where:
            return False
        if self.since is not None and r.when < self.since:
            return False
        if self.until is not None and r.when > self.until:
            return False
        if self.events is not None and r.event not in self.events:
            return False
        return True


class AuditLog:
    """Totally ordered event log. Appends are serialized by an internal lock."""

    def __init__(self, path: str | Path | None = None, *, fsync: bool = False):
        self.path = Path(path) if path is not None else None
        self.fsync = fsync
        self._records: list[AuditRecord] = []
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None:
            if self.path.exists():
                self._records = list(_read_jsonl(self.path))
            try:
                self._fh = open(self.path, "a", encoding="utf-8")
            except OSError as e:
                raise StorageFailure(f"cannot open audit log {self.path}: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> "AuditLog":
        """Read-only in-memory copy of a persisted log."""
        log = cls()
        log._records = list(_read_jsonl(Path(path)))
        return log

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(list(self._records))

    @property
    def records(self) -> list[AuditRecord]:
        return list(self._records)

    def append(self, event: EventKind | str, when: float, **fields) -> AuditRecord:
        with self._lock:
            seq = self._records[-1].seq + 1 if self._records else 1
            rec = AuditRecord(seq=seq, when=when, event=event, **fields)
            if self._fh is not None:
                try:
                    self._fh.write(rec.to_json() + "\n")
                    self._fh.flush()
                    if self.fsync:
                        os.fsync(self._fh.fileno())
                except OSError as e:
                    raise StorageFailure(f"audit append failed: {e}") from e
            self._records.append(rec)
            return rec

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def query(self, flt: AuditFilter | None = None, **kw) -> list[AuditRecord]:
        if flt is None:
            if "events" in kw and kw["events"] is not None:
                kw["events"] = frozenset(EventKind(e) for e in kw["events"])
            flt = AuditFilter(**kw)
        snapshot = self._records[:]
        return [r for r in snapshot if flt.matches(r)]

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self._records)

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def _read_jsonl(path: Path) -> Iterable[AuditRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield AuditRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError):
                # a crash can leave a torn final line
                logger.warning("skipping unreadable audit line %d in %s", lineno, path)


class SuspicionKind(str, Enum):
    CERT_CLONE_ATTEMPT = "CertCloneAttempt"
    LOGIN_FAIL_BURST = "LoginFailBurst"
    UNREGISTERED_MAC = "UnregisteredMac"


@dataclass(frozen=True)
class SuspicionFlag:
    kind: SuspicionKind
    subject: str
    evidence: tuple[int, ...]

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("a suspicion flag needs evidence")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "subject": self.subject, "evidence": list(self.evidence)}


def _bursts(records, key, window, satisfied):
    """Yield (subject, evidence seqs) for each non-overlapping burst per subject."""
    windows: dict[str, deque] = defaultdict(deque)
    for r in records:
        subject = key(r)
        if subject is None:
            continue
        win = windows[subject]
        win.append(r)
        while win and r.when - win[0].when > window:
            win.popleft()
        if satisfied(win):
            yield subject, tuple(x.seq for x in win)
            win.clear()


def detect_suspicion(log: AuditLog | Iterable[AuditRecord], window: float = 60.0,
                     login_fail_threshold: int = 5) -> list[SuspicionFlag]:
    records = sorted(log, key=lambda r: (r.when, r.seq))
    flags: list[SuspicionFlag] = []

    cert_events = [r for r in records
                   if r.event in (EventKind.CERT_OK, EventKind.CERT_REJECT)
                   and r.detail.get("fingerprint")]
    for fp, ev in _bursts(cert_events, lambda r: r.detail["fingerprint"], window,
                          lambda w: len({x.what.mac for x in w}) >= 2):
        flags.append(SuspicionFlag(SuspicionKind.CERT_CLONE_ATTEMPT, fp, ev))

    fails = [r for r in records if r.event is EventKind.LOGIN_FAIL
             and r.detail.get("reason", "AuthFailed") == "AuthFailed"]
    for who, ev in _bursts(fails, lambda r: r.who, window,
                           lambda w: len(w) >= login_fail_threshold):
        flags.append(SuspicionFlag(SuspicionKind.LOGIN_FAIL_BURST, who, ev))

    unregistered: dict[str, list[int]] = {}
    for r in records:
        if r.event is EventKind.CONNECT and r.detail.get("registered") is False and r.what.mac:
            unregistered.setdefault(r.what.mac, []).append(r.seq)
    for mac, seqs in unregistered.items():
        flags.append(SuspicionFlag(SuspicionKind.UNREGISTERED_MAC, mac, tuple(seqs)))

    flags.sort(key=lambda f: (f.evidence[0], f.kind.value))
    return flags
