"""Controller reaction to link failures: uncoded flows reroute, coded flows
stay put while every sink still receives a full generation, and redundancy
rises when it does not.

Run: python demos/controller_failover.py
"""

from ncsdn.analytic import ScenarioParams
from ncsdn.controller import Controller
from ncsdn.rules import dump_rules
from ncsdn.simnet import build_parallel_paths, build_two_path

params = ScenarioParams(lam=100.0, p_loss=0.0, p_failure=0.0)


def show(title, updates):
    print(f"== {title}")
    if not updates:
        print("   no rule changes")
    for flow, (removed, added) in updates.items():
        print(f"   flow {flow}: -{len(removed)} +{len(added)} rules")
        print("".join("   - " + line + "\n" for line in dump_rules(removed).splitlines()), end="")
        print("".join("   + " + line + "\n" for line in dump_rules(added).splitlines()), end="")


ctl = Controller(build_two_path())
ctl.install_flow("f1", params, coded=False)
show("uncoded, P1->D down", ctl.handle_link_down(("P1", "D")))

ctl = Controller(build_two_path())
ctl.install_flow("f1", params)
show("coded g=1 k=2, P1->D down (one copy still arrives)", ctl.handle_link_down(("P1", "D")))

ctl = Controller(build_two_path())
ctl.install_flow("f1", params.replace(generation_size=2))
show("coded g=2 k=2, P1->D down (generation incomplete)", ctl.handle_link_down(("P1", "D")))

ctl = Controller(build_parallel_paths(3))
ctl.install_flow("f1", params.replace(n=3, heaviest_path_fraction=0.8), coded=False)
print("== rebalancing a 0.8/0.1/0.1 split from observed loads")
w = ctl.flows["f1"].weights["D"]
for step in range(6):
    w = ctl.rebalance("f1", [1000 * x for x in w])
    print(f"   step {step + 1}: " + " ".join(f"{x:.4f}" for x in w))
