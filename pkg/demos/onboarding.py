"""Register a laptop, fail posture, fix it, get a certificate, then watch a clone get caught.

Run: python3 demos/onboarding.py
"""

from datetime import timedelta

from byodsim.access_control import SIM_EPOCH, Registry, nac_gate
from byodsim.audit import AuditLog, detect_suspicion
from byodsim.net_model import AntivirusInfo, ClientDevice

log = AuditLog()
reg = Registry({"S00042"}, key=b"demo-signing-key-32-bytes-long!!", audit=log)

stale = AntivirusInfo("ClamAV", "0.98", SIM_EPOCH.date() - timedelta(days=90))
laptop = ClientDevice(mac="02:00:00:00:00:2a", serial_imei="356938035643809", antivirus=stale)
rec = reg.register_device("S00042", laptop, 0.0)

print("first check:", reg.assess(rec, 0.0).deficiencies, "->", nac_gate(rec).value)

rec.device = ClientDevice(mac=laptop.mac, serial_imei=laptop.serial_imei,
                          antivirus=AntivirusInfo("ClamAV", "0.99", SIM_EPOCH.date()))
print("after update:", reg.assess(rec, 60.0).deficiencies, "->", nac_gate(rec).value)

cert = reg.issue(rec, validity=30 * 86400.0, now=60.0)
print("own laptop:  ", reg.verify(cert, laptop.mac, laptop.serial_imei, 120.0).value)

thief = ClientDevice(mac="02:00:00:00:00:99", serial_imei="490154203237518")
print("copied cert: ", reg.verify(cert, thief.mac, thief.serial_imei, 150.0).value)

for flag in detect_suspicion(log):
    print("flag:", flag.kind.value, "evidence seq", flag.evidence)
