"""Independent oracles for the constants frozen into the unit tests.

Run with numpy, scipy and mpmath available; the printed values are pasted
into the corresponding test files.
"""
import math

import mpmath as mp
import numpy as np
from scipy.optimize import linprog

mp.mp.dps = 40


def matern(r, nu, l):
    if r == 0:
        return mp.mpf(1)
    s = mp.sqrt(2 * nu) * r / l
    return 2 ** (1 - nu) / mp.gamma(nu) * s**nu * mp.besselk(nu, s)


def g_poly(x, y):
    # Horner form, typed independently of data/g_poly_coefficients.csv.
    px = ((((2 * x - 12.2) * x + 21.2) * x - 6.4) * x - 4.7) * x + 6.2
    py = ((((y - 11) * y + 43.3) * y - 74.8) * y + 56.9) * y - 10
    mixed = -4.1 * x * y - 0.1 * x**2 * y**2 + 0.4 * x * y**2 + 0.4 * x**2 * y
    return -(px * x + py * y + mixed)


def maximin_lp(table):
    n, m = table.shape
    # variables p_1..p_n, v; minimize -v
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-table.T, np.ones((m, 1))])
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    return -res.fun


def circle_endpoint(v, steering, ratio, wheelbase, t):
    w = v * math.tan(steering / ratio) / wheelbase
    r = v / w
    return r * math.sin(w * t), r * (1 - math.cos(w * t)), w * t


def main():
    print("matern")
    for r, nu, l in [(1.0, 1.5, 1.0), (0.9, 1.2, 0.7), (0.3, 3.7, 2.0), (2.0, 0.8, 0.5), (1.3, 2.5, 0.6)]:
        print(f"  r={r} nu={nu} l={l}: {mp.nstr(matern(mp.mpf(r), mp.mpf(nu), mp.mpf(l)), 17)}")

    print("g_poly")
    for x, y in [(0.0, 0.0), (1.0, 1.0), (2.8, 4.0), (-0.5, 0.3), (1.7, 2.2)]:
        print(f"  ({x}, {y}): {g_poly(mp.mpf(x), mp.mpf(y))}")

    print("maximin tables")
    rng = np.random.default_rng(20240611)
    for shape in [(10, 4), (6, 3)]:
        t = np.round(rng.uniform(size=shape), 3)
        print("  table", shape)
        for row in t:
            print("   ", ", ".join(f"{v:.3f}" for v in row) + ",")
        print(f"  tau* = {maximin_lp(t):.12f}")

    xs, ys = np.meshgrid(np.linspace(-0.95, 3.2, 2001), np.linspace(-0.45, 4.4, 2001))
    h = 1e-6
    gx = (g_poly(xs + h, ys) - g_poly(xs - h, ys)) / (2 * h)
    gy = (g_poly(xs, ys + h) - g_poly(xs, ys - h)) / (2 * h)
    print("g_poly max gradient norm on the natural box:", np.max(np.hypot(gx, gy)))

    print("bicycle circle, handwheel pi/60, 20 m/s, 8 s")
    print("  x, y, heading =", circle_endpoint(20.0, math.pi / 60, 15.0, 2.7, 8.0))


if __name__ == "__main__":
    main()
