"""AP throughput degradation chain and slow-client airtime accounting.

Raw channel capacity is reduced by three successive multiplicative losses:
protocol/packet overhead, client contention, and a catch-all for
retransmissions and rogue-network interference. What is left is divided
among the clients on the AP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .net_model import AccessPoint

__all__ = [
    "DegradationFactors", "ClientLoad", "ZeroClients",
    "effective_throughput", "effective_ap_throughput", "per_client_throughput",
    "airtime_share",
]


class ZeroClients(ValueError):
    pass


@dataclass(frozen=True)
class DegradationFactors:
    overhead: float = 0.45
    contention: float = 0.50
    misc: float = 0.25

    def __post_init__(self):
        for name in ("overhead", "contention", "misc"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} fraction must lie in [0, 1), got {v}")

    @property
    def retained(self) -> float:
        """Fraction of raw capacity left after all three losses."""
        return (1.0 - self.overhead) * (1.0 - self.contention) * (1.0 - self.misc)

    @classmethod
    def from_dict(cls, doc: dict | None) -> "DegradationFactors":
        doc = doc or {}
        base = cls()
        return cls(
            overhead=float(doc.get("overhead", base.overhead)),
            contention=float(doc.get("contention", base.contention)),
            misc=float(doc.get("misc", base.misc)),
        )

    def to_dict(self) -> dict:
        return {"overhead": self.overhead, "contention": self.contention, "misc": self.misc}


@dataclass(frozen=True)
class ClientLoad:
    device_id: str
    phy_rate: float  # Mbps
    offered_packets: float = 1.0

    def __post_init__(self):
        if not self.phy_rate > 0:
            raise ValueError(f"phy_rate must be > 0 for {self.device_id}")
        if self.offered_packets < 0:
            raise ValueError(f"offered_packets must be >= 0 for {self.device_id}")


def effective_throughput(raw_mbps: float, f: DegradationFactors = DegradationFactors()) -> float:
    return raw_mbps * (1.0 - f.overhead) * (1.0 - f.contention) * (1.0 - f.misc)


def effective_ap_throughput(ap: AccessPoint, f: DegradationFactors = DegradationFactors()) -> float:
    return effective_throughput(ap.raw_capacity, f)


def per_client_throughput(ap: AccessPoint, n_clients: int,
                          f: DegradationFactors = DegradationFactors()) -> float:
    """Equal-share throughput when ``n_clients`` with equal PHY rates share ``ap``."""
    if n_clients < 1:
        raise ZeroClients("per-client throughput needs at least one client")
    return effective_ap_throughput(ap, f) / n_clients


def airtime_share(loads: Sequence[ClientLoad]) -> list[float]:
    """Fraction of channel time each client occupies.

    Time on air for a client is its packet count over its PHY rate, so a 1 Mbps
    client holds the channel 100x longer per packet than a 100 Mbps one.
    """
    if not loads:
        raise ValueError("airtime_share needs at least one client")
    packets = np.array([l.offered_packets for l in loads], dtype=float)
    rates = np.array([l.phy_rate for l in loads], dtype=float)
    airtime = packets / rates
    total = airtime.sum()
    if total == 0:
        return [1.0 / len(loads)] * len(loads)
    return (airtime / total).tolist()
