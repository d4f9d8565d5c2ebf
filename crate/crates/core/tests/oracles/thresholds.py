"""Arbitrary-precision reference values for the closed-form thresholds.

Regenerate with:

    python3 crates/core/tests/oracles/thresholds.py > crates/core/tests/fixtures/thresholds.json

The Rust side evaluates everything in log space with f64; this script
evaluates the textbook expressions directly with mpmath at 60 digits,
including 2**M for covers with M far beyond the f64 range.
"""

import json
import math
import random

from mpmath import mp, mpf, log, sqrt, ceil

mp.dps = 60


def cover(eps, dim):
    # ceil(1/eps)^dim, with the same tolerance the library applies to 1/eps.
    side = math.ceil(1.0 / eps - 1e-9)
    return side ** dim


def log_term(m):
    return log(2 * (mpf(2) ** m - 2))


def eta(eps, dim, delta, n):
    m = cover(eps, dim)
    return sqrt(2 * (log_term(m) + log(1 / mpf(delta))) / n)


def t_similarity(eps, dim, alpha, n):
    m = cover(eps, dim)
    return sqrt((2 * log_term(m) + 2 * log(1 / mpf(alpha))) / n)


def t_projected(eps, k, alpha, n):
    m = cover(eps, 1)
    return sqrt((log(mpf(k)) + 2 * log_term(m) + 2 * log(1 / mpf(alpha))) / n)


def sample_size_bound(theta0, eps, dim, alpha, beta):
    m = cover(eps, dim)
    num = 4 * log_term(m) + 2 * log(1 / mpf(alpha)) + 2 * log(1 / mpf(beta))
    return num / mpf(theta0) ** 2


EPS = [0.5, 0.25, 0.2, 0.1, 0.3, 0.05, 0.01, 0.4, 0.15]
# (eps, dim) pairs with covers of at least 1e18.
HUGE = [(0.01, 10), (0.1, 18), (0.5, 60), (0.05, 14), (0.01, 40), (0.1, 300)]
PROBS = [0.05, 0.01, 0.1, 0.2, 0.001]
SIZES = [10, 100, 250, 1000, 5000, 10 ** 6]


def fmt(x):
    return mp.nstr(x, 40, min_fixed=-1, max_fixed=-1)


def main():
    rng = random.Random(20240611)
    eta_rows, sim_rows, ppv_rows, size_rows = [], [], [], []

    for i in range(50):
        if i < len(HUGE):
            eps, dim = HUGE[i]
        else:
            eps, dim = rng.choice(EPS), rng.randint(1, 6)
        delta = rng.choice(PROBS)
        n = rng.choice(SIZES)
        eta_rows.append(dict(epsilon=eps, dim=dim, delta=delta, n=n, value=fmt(eta(eps, dim, delta, n))))

        if i < len(HUGE):
            eps, dim = HUGE[(i + 1) % len(HUGE)]
        else:
            eps, dim = rng.choice(EPS), rng.randint(1, 6)
        alpha = rng.choice(PROBS)
        n = rng.choice(SIZES)
        sim_rows.append(dict(epsilon=eps, dim=dim, alpha=alpha, n=n, value=fmt(t_similarity(eps, dim, alpha, n))))

        eps = rng.choice(EPS + [0.02, 0.011, 0.001])
        k = rng.choice([1, 2, 10, 100, 1000])
        alpha = rng.choice(PROBS)
        n = rng.choice(SIZES)
        ppv_rows.append(dict(epsilon=eps, k=k, alpha=alpha, n=n, value=fmt(t_projected(eps, k, alpha, n))))

        while True:
            if i < len(HUGE):
                eps, dim = HUGE[(i + 2) % len(HUGE)]
            else:
                eps, dim = rng.choice(EPS), rng.randint(1, 5)
            theta0 = rng.choice([1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.7])
            alpha = rng.choice(PROBS)
            beta = rng.choice(PROBS)
            bound = sample_size_bound(theta0, eps, dim, alpha, beta)
            frac = bound - mp.floor(bound)
            # keep away from integer boundaries so the ceiling is unambiguous;
            # past 1e9 double rounding can move the ceiling, so only the
            # real-valued bound is compared there
            if bound > 1e9 or 1e-6 < frac < 1 - 1e-6:
                break
        size_rows.append(dict(
            theta0=theta0, epsilon=eps, dim=dim, alpha=alpha, beta=beta,
            bound=fmt(bound), n=int(ceil(bound)) if bound < 1e9 else None,
        ))

    print(json.dumps(dict(
        deviation_eta=eta_rows,
        similarity_threshold=sim_rows,
        projected_threshold=ppv_rows,
        required_sample_size=size_rows,
    ), indent=1))


if __name__ == "__main__":
    main()
