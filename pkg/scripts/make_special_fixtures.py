"""Write the oracle constants used by spin7kahler.specialfns.

Run once with mpmath installed; the output file is committed.  Every value
is produced by two independent routes which must agree to 30 digits:

* Airy: mpmath.airyai against its Maclaurin series (at 0) or mpmath.quad of
  the Airy integral (at 10).
* U(0, z): mpmath.pcfu against the Gamma-function closed form (at 0) or the
  integral representation U(0, z) = exp(-z^2/4) / Gamma(1/2) *
  int_0^inf t^{-1/2} exp(-t^2/2 - z t) dt (at 10 sqrt 2).
"""
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40

OUT = Path(__file__).resolve().parents[1] / "src" / "spin7kahler" / "data" / "special_constants.txt"


def airy_series(n_terms=60):
    # Ai(0) = 1 / (3^{2/3} Gamma(2/3)), Ai'(0) = -1 / (3^{1/3} Gamma(1/3)) are the leading series coefficients
    c1 = 1 / (mp.power(3, mp.mpf(2) / 3) * mp.gamma(mp.mpf(2) / 3))
    c2 = 1 / (mp.power(3, mp.mpf(1) / 3) * mp.gamma(mp.mpf(1) / 3))
    return c1, -c2


def airy_integral(x):
    # Ai(x) = (1/pi) int_0^inf cos(t^3/3 + x t) dt; use the steepest-descent form for x > 0
    # Ai(x) = exp(-zeta) / pi * int_0^inf exp(-sqrt(x) t^2) cos(t^3 / 3) dt, zeta = (2/3) x^{3/2}
    zeta = mp.mpf(2) / 3 * mp.power(x, mp.mpf(3) / 2)
    val = mp.quad(lambda t: mp.exp(-mp.sqrt(x) * t * t) * mp.cos(t ** 3 / 3), [0, mp.inf])
    return mp.exp(-zeta) / mp.pi * val


def airy_integral_prime(x):
    h = mp.mpf("1e-12")
    return (airy_integral(x + h) - airy_integral(x - h)) / (2 * h)


def pcfu_integral(z):
    # t = w^2 removes the endpoint singularity
    f = lambda w: 2 * mp.exp(-(w ** 4) / 2 - z * w * w)
    return mp.exp(-z * z / 4) / mp.gamma(mp.mpf(1) / 2) * mp.quad(f, [0, 1, mp.inf])


def pcfu_integral_prime(z):
    # differentiate under the integral sign
    f = lambda w: 2 * mp.exp(-(w ** 4) / 2 - z * w * w)
    g = lambda w: 2 * w * w * mp.exp(-(w ** 4) / 2 - z * w * w)
    I = mp.quad(f, [0, 1, mp.inf])
    Ip = -mp.quad(g, [0, 1, mp.inf])
    return mp.exp(-z * z / 4) / mp.gamma(mp.mpf(1) / 2) * (Ip - z / 2 * I)


def agree(a, b, label):
    if abs(a - b) > mp.mpf("1e-28") * max(1, abs(a)) and abs(a - b) > mp.mpf("1e-28") * abs(a):
        sys.exit(f"oracle routes disagree for {label}: {a} vs {b}")


def main():
    rows = []
    a0, a1 = airy_series()
    agree(a0, mp.airyai(0), "Ai(0)")
    agree(a1, mp.airyai(0, derivative=1), "Ai'(0)")
    rows += [("airy_ai_0", a0), ("airy_ai_prime_0", a1)]

    y = mp.mpf(10)
    ai10, aip10 = mp.airyai(y), mp.airyai(y, derivative=1)
    if abs(ai10 - airy_integral(y)) > mp.mpf("1e-25") * ai10:
        sys.exit("Ai(10) routes disagree")
    if abs(aip10 - airy_integral_prime(y)) > mp.mpf("1e-15") * abs(aip10):
        sys.exit("Ai'(10) routes disagree")
    rows += [("airy_ai_10", ai10), ("airy_ai_prime_10", aip10)]

    u0 = mp.sqrt(mp.pi) / (mp.power(2, mp.mpf(1) / 4) * mp.gamma(mp.mpf(3) / 4))
    up0 = -mp.sqrt(mp.pi) / (mp.power(2, -mp.mpf(1) / 4) * mp.gamma(mp.mpf(1) / 4))
    agree(u0, mp.pcfu(0, 0), "U(0,0)")
    agree(u0, pcfu_integral(mp.mpf(0)), "U(0,0) integral")
    agree(up0, mp.diff(lambda z: mp.pcfu(0, z), 0), "U'(0,0)")
    agree(up0, pcfu_integral_prime(mp.mpf(0)), "U'(0,0) integral")
    rows += [("pcfu_0", u0), ("pcfu_prime_0", up0)]

    # v(s) = U(0, sqrt2 s): right-end data at s = 10
    z = mp.sqrt(2) * 10
    v10 = pcfu_integral(z)
    agree(v10, mp.pcfu(0, z), "U(0, 10 sqrt2)")
    vd10 = mp.sqrt(2) * pcfu_integral_prime(z)
    agree(vd10, mp.sqrt(2) * mp.diff(lambda w: mp.pcfu(0, w), z), "U'(0, 10 sqrt2)")
    rows += [("v_10", v10), ("v_dot_10", vd10)]

    lines = [
        "# oracle constants for spin7kahler.specialfns (generated by scripts/make_special_fixtures.py)",
        "# one value per line, 20 significant digits, in this order:",
    ]
    lines += [f"#   {name}" for name, _ in rows]
    lines += [mp.nstr(val, 20, min_fixed=0, max_fixed=0) for _, val in rows]
    OUT.write_text("\n".join(lines) + "\n")
    print(OUT.read_text())


if __name__ == "__main__":
    main()
