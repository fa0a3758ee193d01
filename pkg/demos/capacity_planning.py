"""How many students can one dual-radio AP carry before browsing suffers?

Run: python3 demos/capacity_planning.py
"""

import numpy as np

from byodsim import AccessPoint, ClientLoad, DegradationFactors, airtime_share, per_client_throughput
from byodsim.net_model import ApKind, Band, Channel

ap = AccessPoint("lecture-ap", ApKind.AUTONOMOUS, 1,
                 (Channel(Band.GHZ_2_4, 300), Channel(Band.GHZ_5, 300)), "WIFI-KNUST")

# per-client share as the room fills up
counts = np.arange(10, 101, 10)
shares = np.array([per_client_throughput(ap, int(n)) for n in counts])
for n, mbps in zip(counts, shares):
    bar = "#" * int(mbps * 4)
    print(f"{n:4d} clients  {mbps:6.3f} Mbps  {bar}")

# what if the radios were cleaner?
clean = DegradationFactors(overhead=0.30, contention=0.40, misc=0.10)
print("\n50 clients, default losses:", per_client_throughput(ap, 50))
print("50 clients, cleaner air:  ", round(per_client_throughput(ap, 50, clean), 3))

# one slow legacy laptop drags everyone
fast = [ClientLoad(f"fast{i}", 100.0) for i in range(9)]
slow = ClientLoad("legacy-11b", 1.0)
share = airtime_share(fast + [slow])
print(f"\nairtime held by the 1 Mbps laptop: {share[-1]:.1%} (the other nine split {sum(share[:-1]):.1%})")
