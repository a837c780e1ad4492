"""Run the verification suite over every catalog entry and print a one-line summary each."""
import numpy as np

from spin7kahler import catalog
from spin7kahler.cli import verify_bundle

for name in catalog.names():
    b = catalog.build(name)
    pts = b.sample_points(np.random.default_rng(1), 40)
    crit = verify_bundle(b, pts, ricci_points=10)
    upper = [k for k in crit if crit[k].get("bound") != "lower"]
    worst = max(upper, key=lambda k: crit[k]["value"] / crit[k]["limit"])
    ok = all(c["pass"] for c in crit.values())
    print(f"{name:<14} {b.provenance:<8} {b.kind:<6} {'PASS' if ok else 'FAIL'}  worst {worst} = {crit[worst]['value']:.1e}")
