"""Captive-portal gateway: interception, directory login, session expiry.

The gateway keeps a table of portal sessions and the set of source IPs it
lets through. ``authorized_ips`` is always exactly the IPs of Active
sessions; every mutating call goes through one lock so the table and the
set move together.
"""

from __future__ import annotations

import hashlib
import hmac
import html
import json
import os
import struct
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional
from urllib.parse import parse_qs

from .access_control import CertVerdict
from .audit import AccessLevel, AuditLog, EventKind, What
from .policy import AccessRequest, PolicyConfig, Protocol

__all__ = [
    "RedirectMode", "InterceptKind", "Interception", "SessionState", "PortalSession",
    "Directory", "Gateway", "AuthFailed", "DirectoryUnavailable", "CertificateRejected",
    "dns_hijack_response", "PortalApp",
]

DEFAULT_PORTAL_IP = "10.5.0.7"
DEFAULT_PORTAL_PORT = 3905


class RedirectMode(str, Enum):
    DNS_HIJACK = "DnsHijack"
    HTTP_REDIRECT = "HttpRedirect"
    ICMP_REDIRECT = "IcmpRedirect"


class InterceptKind(str, Enum):
    PASS_THROUGH = "PassThrough"
    DNS_ANSWER = "DnsAnswer"
    HTTP_302 = "HttpRedirect302"
    DROP = "Drop"


@dataclass(frozen=True)
class Interception:
    kind: InterceptKind
    address: Optional[str] = None   # portal IP for DnsAnswer
    location: Optional[str] = None  # URL for HttpRedirect302
    via: Optional[str] = None       # why it passed: "whitelist", "authorized", "spoofed"


class SessionState(str, Enum):
    ACTIVE = "Active"
    EXPIRED = "Expired"
    LOGGED_OUT = "LoggedOut"


@dataclass
class PortalSession:
    user: str
    device_ip: str
    device_mac: str
    started_at: float
    expires_at: float
    state: SessionState = SessionState.ACTIVE

    def to_dict(self) -> dict:
        return {
            "user": self.user, "device_ip": self.device_ip, "device_mac": self.device_mac,
            "started_at": self.started_at, "expires_at": self.expires_at, "state": self.state.value,
        }


class AuthFailed(PermissionError):
    pass


class DirectoryUnavailable(ConnectionError):
    """The directory server is down; the login may be retried."""


class CertificateRejected(PermissionError):
    def __init__(self, verdict):
        super().__init__(f"certificate rejected: {getattr(verdict, 'value', verdict)}")
        self.verdict = verdict


class Directory:
    """Student directory: ID -> salted password digest and reference number."""

    def __init__(self, iterations: int = 1000):
        self.iterations = iterations
        self.entries: dict[str, tuple[bytes, bytes, Optional[str]]] = {}
        self.up = True

    def _digest(self, password: str, salt: bytes) -> bytes:
        return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, self.iterations)

    def add(self, student_id: str, password: str, reference: Optional[str] = None,
            salt: Optional[bytes] = None) -> None:
        if student_id in self.entries:
            raise ValueError(f"duplicate student id {student_id}")
        salt = salt if salt is not None else os.urandom(16)
        self.entries[student_id] = (salt, self._digest(password, salt), reference)

    def check(self, student_id: str, password: str, reference: Optional[str] = None) -> bool:
        if not self.up:
            raise DirectoryUnavailable("directory server unreachable")
        entry = self.entries.get(student_id)
        if entry is None:
            return False
        salt, digest, ref = entry
        if not hmac.compare_digest(digest, self._digest(password, salt)):
            return False
        # reference number is optional at login; when given it must match
        return reference in (None, "") or reference == ref


class Gateway:
    def __init__(self, policy: PolicyConfig, *, portal_ip: str = DEFAULT_PORTAL_IP,
                 portal_port: int = DEFAULT_PORTAL_PORT, portal_domain: str = "portal.knust.edu.gh",
                 redirect_mode: RedirectMode = RedirectMode.DNS_HIJACK,
                 whitelist: frozenset[str] = frozenset(), audit: Optional[AuditLog] = None,
                 where: Optional[str] = None):
        if policy.portal_enabled and not policy.session_timeout:
            raise ValueError("portal policy needs a session timeout")
        self.policy = policy
        self.portal_ip = portal_ip
        self.portal_port = portal_port
        self.portal_domain = portal_domain
        self.redirect_mode = RedirectMode(redirect_mode)
        self.whitelist = frozenset({portal_ip, portal_domain, *whitelist})
        self.audit = audit
        self.where = where
        self.sessions: list[PortalSession] = []
        self._active: dict[str, PortalSession] = {}  # ip -> Active session
        self._lock = threading.RLock()

    @property
    def portal_url(self) -> str:
        return f"http://{self.portal_ip}:{self.portal_port}/login"

    @property
    def authorized_ips(self) -> frozenset[str]:
        with self._lock:
            return frozenset(self._active)

    def active_session(self, ip: str) -> Optional[PortalSession]:
        return self._active.get(ip)

    def _emit(self, event, now, s: PortalSession, **kw):
        if self.audit is not None:
            self.audit.append(event, now, who=s.user, what=What(s.device_mac, s.device_mac, s.device_ip),
                              where=self.where, **kw)

    def _whitelisted(self, req: AccessRequest) -> bool:
        if req.dst_ip is not None and req.dst_ip in self.whitelist:
            return True
        d = req.dst_domain.lower().rstrip(".")
        return d in self.whitelist

    def intercept(self, req: AccessRequest) -> Interception:
        with self._lock:
            authorized = req.src_ip in self._active
        if self._whitelisted(req):
            return Interception(InterceptKind.PASS_THROUGH, via="whitelist")
        if authorized:
            return Interception(InterceptKind.PASS_THROUGH, via="authorized")
        if self.redirect_mode is RedirectMode.DNS_HIJACK:
            if req.protocol is Protocol.DNS:
                return Interception(InterceptKind.DNS_ANSWER, address=self.portal_ip)
            return Interception(InterceptKind.DROP)
        if self.redirect_mode is RedirectMode.HTTP_REDIRECT:
            if req.protocol is Protocol.HTTP:
                return Interception(InterceptKind.HTTP_302, location=self.portal_url)
            return Interception(InterceptKind.DROP)
        # ICMP redirect stub: the gateway only advises the client to reroute,
        # so a client forging its source simply ignores the advice.
        if req.spoofed:
            return Interception(InterceptKind.PASS_THROUGH, via="spoofed")
        return Interception(InterceptKind.DROP)

    def login(self, directory: Directory, student_id: str, password: str, *,
              device_ip: str, device_mac: str, now: float, reference: Optional[str] = None,
              cert_verdict: Optional[CertVerdict] = None) -> PortalSession:
        policy = self.policy
        with self._lock:
            probe = PortalSession(student_id, device_ip, device_mac, now, now)
            if policy.nac_enabled and cert_verdict is not CertVerdict.VALID:
                self._emit(EventKind.LOGIN_FAIL, now, probe,
                           detail={"reason": "CertificateRejected",
                                   "verdict": getattr(cert_verdict, "value", None)})
                raise CertificateRejected(cert_verdict)
            try:
                ok = directory.check(student_id, password, reference)
            except DirectoryUnavailable:
                self._emit(EventKind.LOGIN_FAIL, now, probe, detail={"reason": "DirectoryUnavailable"})
                raise
            if not ok:
                self._emit(EventKind.LOGIN_FAIL, now, probe, detail={"reason": "AuthFailed"})
                raise AuthFailed(student_id)
            old = self._active.pop(device_ip, None)
            if old is not None:
                old.state = SessionState.LOGGED_OUT
                self._emit(EventKind.LOGOUT, now, old, detail={"reason": "superseded"})
            session = PortalSession(student_id, device_ip, device_mac, now,
                                    now + float(policy.session_timeout))
            self.sessions.append(session)
            self._active[device_ip] = session
            self._emit(EventKind.LOGIN_OK, now, session, access_level=AccessLevel.FULL_PIPELINE,
                       detail={"expires_at": session.expires_at})
            return session

    def expire_sessions(self, now: float) -> list[PortalSession]:
        with self._lock:
            due = [s for s in self._active.values() if s.expires_at <= now]
            due.sort(key=lambda s: (s.expires_at, s.device_ip))
            for s in due:
                s.state = SessionState.EXPIRED
                del self._active[s.device_ip]
                self._emit(EventKind.SESSION_EXPIRE, now, s)
            return due

    def on_disconnect(self, device_ip: str, now: float = 0.0) -> Optional[PortalSession]:
        with self._lock:
            s = self._active.pop(device_ip, None)
            if s is None:
                return None
            s.state = SessionState.LOGGED_OUT
            self._emit(EventKind.LOGOUT, now, s, detail={"reason": "disconnect"})
            return s

    def session_table(self) -> list[dict]:
        with self._lock:
            return [s.to_dict() for s in self.sessions]

    def session_table_json(self) -> str:
        return json.dumps(self.session_table(), indent=2)


def dns_hijack_response(query: bytes, portal_ip: str) -> bytes:
    """Answer a DNS query with an A record for ``portal_ip`` and TTL 0.

    Only the first question is answered; the question section is echoed back.
    """
    if len(query) < 12:
        raise ValueError("truncated DNS header")
    ident, flags, qdcount = struct.unpack("!HHH", query[:6])
    if qdcount < 1:
        raise ValueError("DNS query carries no question")
    pos = 12
    while True:
        if pos >= len(query):
            raise ValueError("truncated DNS question name")
        n = query[pos]
        if n & 0xC0:
            raise ValueError("compressed names are not valid in a question")
        pos += 1 + n
        if n == 0:
            break
    if len(query) < pos + 4:
        raise ValueError("truncated DNS question")
    question = query[12:pos + 4]
    rd = flags & 0x0100
    resp_flags = 0x8000 | 0x0400 | rd | 0x0080  # QR, AA, RD echoed, RA
    header = struct.pack("!HHHHHH", ident, resp_flags, 1, 1, 0, 0)
    answer = (struct.pack("!H", 0xC00C)                # pointer to the question name
              + struct.pack("!HHIH", 1, 1, 0, 4)       # A, IN, TTL 0, rdlength
              + bytes(int(o) for o in portal_ip.split(".")))
    return header + question + answer


_LOGIN_PAGE = """<!DOCTYPE html>
<html><head><title>Wi-Fi login</title></head>
<body>
<h1>Sign in to {ssid}</h1>
{message}
<form method="POST" action="/login">
  <label>Student ID <input name="student_id"></label>
  <label>Password <input name="password" type="password"></label>
  <label>Reference number (optional) <input name="reference"></label>
  <button type="submit">Log in</button>
</form>
</body></html>
"""


class PortalApp:
    """WSGI front end for the login page served by the gateway itself.

    ``mac_of`` maps a client IP to its MAC (the gateway's ARP/DHCP view);
    ``clock`` supplies the simulated time.
    """

    def __init__(self, gateway: Gateway, directory: Directory, *,
                 mac_of: Callable[[str], str] = lambda ip: "00:00:00:00:00:00",
                 clock: Callable[[], float] = lambda: 0.0,
                 cert_verdict_of: Callable[[str], Optional[CertVerdict]] = lambda ip: None):
        self.gateway = gateway
        self.directory = directory
        self.mac_of = mac_of
        self.clock = clock
        self.cert_verdict_of = cert_verdict_of

    def _page(self, start_response, status, message=""):
        body = _LOGIN_PAGE.format(ssid=html.escape(self.gateway.policy.ssid),
                                  message=f"<p>{html.escape(message)}</p>" if message else "")
        data = body.encode("utf-8")
        start_response(status, [("Content-Type", "text/html; charset=utf-8"),
                                ("Content-Length", str(len(data)))])
        return [data]

    def __call__(self, environ, start_response):
        path = environ.get("PATH_INFO", "/")
        method = environ.get("REQUEST_METHOD", "GET").upper()
        if path != "/login":
            start_response("302 Found", [("Location", self.gateway.portal_url), ("Content-Length", "0")])
            return [b""]
        if method == "GET":
            return self._page(start_response, "200 OK")
        if method != "POST":
            start_response("405 Method Not Allowed", [("Allow", "GET, POST"), ("Content-Length", "0")])
            return [b""]
        try:
            length = int(environ.get("CONTENT_LENGTH") or 0)
        except ValueError:
            length = 0
        form = parse_qs(environ["wsgi.input"].read(length).decode("utf-8"), keep_blank_values=True)
        get = lambda k: (form.get(k) or [""])[0]
        ip = environ.get("REMOTE_ADDR", "")
        try:
            session = self.gateway.login(
                self.directory, get("student_id"), get("password"), reference=get("reference") or None,
                device_ip=ip, device_mac=self.mac_of(ip), now=self.clock(),
                cert_verdict=self.cert_verdict_of(ip),
            )
        except AuthFailed:
            return self._page(start_response, "401 Unauthorized", "Invalid student ID or password.")
        except DirectoryUnavailable:
            return self._page(start_response, "503 Service Unavailable",
                              "The directory server is unavailable; try again shortly.")
        except CertificateRejected as e:
            return self._page(start_response, "403 Forbidden", str(e))
        data = json.dumps(session.to_dict()).encode("utf-8")
        start_response("200 OK", [("Content-Type", "application/json"), ("Content-Length", str(len(data)))])
        return [data]

    def serve(self, host: str = "0.0.0.0", port: Optional[int] = None):  # pragma: no cover
        from wsgiref.simple_server import make_server
        with make_server(host, port or self.gateway.portal_port, self) as httpd:
            httpd.serve_forever()
