"""BYOD campus WLAN access-control core and deterministic simulator."""

from .capacity import (
    ClientLoad, DegradationFactors, ZeroClients, airtime_share, effective_ap_throughput,
    per_client_throughput,
)
from .net_model import (
    AccessPoint, CampusNetwork, ClientDevice, associate, dhcp_assign, knust_network, slaac_assign,
)
from .policy import AccessRequest, PolicyConfig, Protocol, apply_cap, evaluate_request, preset
from .sim import Scenario, run

__version__ = "0.1.0"

__all__ = [
    "AccessPoint", "AccessRequest", "CampusNetwork", "ClientDevice", "ClientLoad", "DegradationFactors",
    "PolicyConfig", "Protocol", "Scenario", "ZeroClients", "airtime_share", "apply_cap", "associate",
    "dhcp_assign", "effective_ap_throughput", "evaluate_request", "knust_network", "per_client_throughput",
    "preset", "run", "slaac_assign",
]
