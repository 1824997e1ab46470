"""Standalone 40-digit evaluation of the HOM three-fold probability.

Does not import the package; its printed values are frozen into the tests.
Run: python3 tests/oracles/hom_closed_form.py
"""

import mpmath as mp

mp.mp.dps = 40


def p3f(mu_a, mu_b, ei, es, z):
    mu_a, mu_b, ei, es, z = map(mp.mpf, (mu_a, mu_b, ei, es, z))
    a = 1 + ei * mu_b / 2
    b = 1 + (1 - es) * ei * mu_b / 2 + es * mu_b
    return (
        1
        - 2 * mp.exp(-(mu_a / 2) * (1 + (1 - z**2) * ei * mu_b / 2) / a) / a
        - 1 / (1 + es * mu_b)
        + mp.exp(-mu_a) / (1 + ei * mu_b)
        - mp.exp(-mu_a) / (1 + (1 - es) * ei * mu_b + es * mu_b)
        + 2 * mp.exp(-(mu_a / 2) * (1 + (1 - z**2) * (1 - es) * ei * mu_b / 2 + es * mu_b) / b) / b
    )


def vis(mu_a, mu_b, ei, es, z):
    p0 = p3f(mu_a, mu_b, ei, es, 0)
    return (p0 - p3f(mu_a, mu_b, ei, es, z)) / p0


if __name__ == "__main__":
    base = (8.0e-3, 1.2e-2, 4.5e-3)
    print("P3f(2.6e-3, zeta=0.9) =", mp.nstr(p3f(2.6e-3, *base, 0.9), 20))
    print("P3f(2.6e-3, zeta=0)   =", mp.nstr(p3f(2.6e-3, *base, 0), 20))
    print("V(zeta=1)   =", mp.nstr(vis(2.6e-3, *base, 1), 20))
    print("V(zeta=0.9) =", mp.nstr(vis(2.6e-3, *base, 0.9), 20))
    print("P3f(0.01, 0.01, 0.3, 0.2, 0.7) =", mp.nstr(p3f(0.01, 0.01, 0.3, 0.2, 0.7), 20))
    # extra fibre loss folds into Alice's mean photon number and the idler efficiency
    ta, tb = 10 ** mp.mpf(-0.592), 10 ** mp.mpf(-0.256)
    print("V fibre(zeta=0.9) =", mp.nstr(vis(2.6e-3 * ta, 8.0e-3, 1.2e-2 * tb, 4.5e-3, 0.9), 20))
