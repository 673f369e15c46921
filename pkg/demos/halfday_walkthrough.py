"""
One half-day, solved two ways
=============================

Build a tiny instance, solve Monday morning with the large neighbourhood
search, then check the answer against exhaustive enumeration.
"""

from tcdarp.generator import generate_instance
from tcdarp.lns import LnsParams, solve_halfday
from tcdarp.model import Period, expand_requests
from tcdarp.oracle import halfday_bruteforce

inst = generate_instance(seed=3, n_users=4, attendance_prob=1.0, vehicle_catalog_preset="minibus")
period = Period.parse("mon-am")
print(len(expand_requests(inst, period)), "requests on", period.name)

# %%
# The search keeps every route it accepts; those routes feed the weekly master.
history = []
sol, pool = solve_halfday(inst, period, LnsParams(iterations=3000, seed=1), history=history)
print("lns cost", sol.total_cost, "after", len(history), "iterations;", len(pool), "pooled routes")

for route in sol.routes:
    times = route.pickup_times()
    print(f"  {route.vehicle.id}: {' -> '.join(f'{a.kind[0]}:{a.user}' for a in route.actions)}"
          f"  pickups {times}  cost {route.cost}")

# %%
# Exhaustive search over partitions, vehicle choices and stop orders.
ref = halfday_bruteforce(inst, period)
print("exhaustive cost", ref.total_cost, "match" if ref.total_cost == sol.total_cost else "gap")

# best-so-far cost every 500 iterations, in cents
print(history[::500])
