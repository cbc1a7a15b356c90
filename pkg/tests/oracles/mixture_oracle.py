"""Quadrature oracle for the peak+Laplace relative-asymmetry mixture.

Integrates the density directly (no closed-form CDF) to produce reference
probabilities frozen into test_asymmodel.py.
"""
import math

from scipy.integrate import quad

W, B, P = 0.00136, 0.0450, 0.274


def pdf(t, w=W, b=B, p=P):
    if abs(t) > 1:
        return 0.0
    peak = 1.0 / w if abs(t) <= w / 2 else 0.0
    norm = 2 * b * (1 - math.exp(-1 / b))
    return p * peak + (1 - p) * math.exp(-abs(t) / b) / norm


def mass(lo, hi, **kw):
    pts = [x for x in (-W / 2, 0.0, W / 2) if lo < x < hi]
    return quad(lambda t: pdf(t, **kw), lo, hi, points=pts or None, limit=200, epsabs=1e-13)[0]


if __name__ == "__main__":
    print("P(|T|<=0.02)", repr(mass(-0.02, 0.02)))
    print("P(|T|<=w/2)", repr(mass(-W / 2, W / 2)))
    print("cdf(-0.1)", repr(mass(-1, -0.1)))
    print("cdf(0.05)", repr(mass(-1, 0.05)))
