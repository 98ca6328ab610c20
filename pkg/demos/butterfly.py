"""The butterfly multicast: coding at the branch halves the traffic on the
shared bottleneck and both sinks still decode every generation.

Run: python demos/butterfly.py
"""

from ncsdn.analytic import ScenarioParams
from ncsdn.controller import Controller
from ncsdn.harness import collect_metrics
from ncsdn.simnet import build_butterfly, run

params = ScenarioParams(lam=1000.0, p_loss=0.0, p_failure=0.0, k=3, generation_size=2,
                        field="gf2", heaviest_path_fraction=0.5, retransmit_limit=0)

for coded in (False, True):
    topo = build_butterfly()
    ctl = Controller(topo)
    rules = ctl.install_flow("mcast", params, coded=coded)
    trace = run(topo, params, rules, seed=1, duration=1.0, capture=True)
    per_gen = trace.link_generation_counts[("T1", "T2")]
    label = "coded" if coded else "uncoded"
    print(f"--- {label} ---")
    print(ctl.dump(), end="")
    print(f"T1->T2 packets per generation: {sorted(set(per_gen.values()))}")
    print(f"T1->T2 total: {trace.links[('T1', 'T2')].sent} for {len(per_gen)} generations")
    m = collect_metrics(trace, 1.0)
    print(f"delivered {m.delivered}/{m.units} units, decode errors {trace.decode_errors}")
    if coded:
        for sink in ("B2", "C2"):
            vecs = [v for v, _ in trace.inbox[(sink, "mcast", 0)]]
            print(f"{sink} received vectors for generation 0: {vecs}")
    print()
