"""Convergence tables for the two grid evolvers against their closed-form solutions."""
from spin7kahler import pde

print("Monge-Ampere, perturbed GLPS potential v(s) sin x1")
errs, hs = [], []
for n in (8, 16, 32):
    fx = pde.ma_fixture("perturbed_glps", n, shape=(n, 4, 4, 4))
    rep, _, err = pde.run_ma_fixture(fx)
    errs.append(err)
    hs.append(fx.F0.spacings[0])
for row in pde.convergence_table(errs, hs):
    print(f"  h={row['h']:.4f}  err={row['error']:.3e}  order={row.get('order', float('nan')):.3f}")

# the quadratic potential of constant_I is reproduced exactly by the stencil
fx = pde.ma_fixture("constant_I", 16, shape=(16, 4, 4, 4))
print("constant_I omega error:", pde.run_ma_fixture(fx)[2])

print("dude4, Airy separable solution Ai(y) sin x1")
errs, hs = [], []
for n in (8, 16, 32, 64):
    fx = pde.dude4_fixture("airy", n)
    rep, err = pde.run_dude4_fixture(fx)
    errs.append(err)
    hs.append(fx.u0.spacings[0])
for row in pde.convergence_table(errs, hs):
    print(f"  h={row['h']:.4f}  err={row['error']:.3e}  order={row.get('order', float('nan')):.3f}")
