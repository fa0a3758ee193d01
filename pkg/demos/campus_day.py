"""Simulate a lecture hall under the session-timeout policy and read back the audit trail.

Run: python3 demos/campus_day.py [scenario.json]
"""

import json
import sys
from pathlib import Path

from byodsim.audit import detect_suspicion
from byodsim.sim import Scenario, run

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).with_name("lecture_hall.json")
scenario = Scenario.from_dict(json.loads(path.read_text()))
result = run(scenario)

print(result.metrics.to_json())

student = "S00003"
print(f"\n{student}'s day:")
for r in result.audit.query(who=student):
    print(f"  t={r.when:8.2f}  {r.event.value}")

flags = detect_suspicion(result.audit)
print(f"\n{len(result.audit)} audit records, {len(flags)} suspicion flags")
