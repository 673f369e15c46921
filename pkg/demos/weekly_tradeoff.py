"""
Cost against regularity over a week
===================================

Solve each half-day independently, then let the consistency loop trade a
little cost for pickup times that repeat from day to day.
"""

from tcdarp.generator import generate_instance
from tcdarp.lns import LnsParams
from tcdarp.weekly import WeeklyParams, evaluate_plan, solve_week

inst = generate_instance(seed=2, n_users=10, attendance_prob=0.8)

params = WeeklyParams(lns=LnsParams(iterations=800, seed=1), intensify_iterations=500, max_rounds=5)
plan = solve_week(inst, params)

# %%
# Round 0 is the union of independent half-day solutions.
for e in plan.trace:
    print(f"round {e.round}: cost {e.total_cost}  classes {e.total_classes}")

for log in plan.rounds:
    print(f"  lambda {log.lam}: master {log.status}, adopted={log.adopted}, pool {log.pool_size}")

# %%
# A hard cap of one class per user and half-day, for comparison.
capped = solve_week(inst, WeeklyParams(lns=params.lns, intensify_iterations=500, max_rounds=5, max_classes=1))
print("cap met:", capped.target_met, "cost", capped.total_cost, "vs", plan.total_cost)

metrics = evaluate_plan(inst, plan)
print({k: metrics[k] for k in ("total_cost", "total_km", "total_classes", "max_ride_min", "kg_co2")})
extra = plan.total_cost - plan.trace[0].total_cost
print(f"regularity cost {extra} for {plan.trace[0].total_classes - plan.report.total_classes} fewer classes")
