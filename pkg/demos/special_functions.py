"""Airy and parabolic-cylinder solutions used by the catalog, and the v(s) < 1 threshold."""
import numpy as np

from spin7kahler.specialfns import airy_ai, domain_threshold_u_less_one, oracle_constants, pcf_u0

c = oracle_constants()
print("Ai(0) integrated vs fixture:", airy_ai(0.0)[0], c["airy_ai_0"])
ys = np.linspace(-8, 8, 9)
for y, a in zip(ys, airy_ai(ys)[0]):
    print(f"  Ai({y:+.1f}) = {a:+.12f}")

s_star = domain_threshold_u_less_one()
print(f"v(s) = U(0, sqrt2 s) drops below 1 at s* = {s_star:.10f}; v(s*) = {pcf_u0(s_star)[0]:.12f}")
