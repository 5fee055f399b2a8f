#!/usr/bin/env python3
"""High-precision reference evaluation of the analytic bound formulas.

Computes, with 60 decimal digits of working precision, the expected outputs
of the MIS failure-bound calculator and the sampling (Hoeffding) calculator
for the parameter points frozen into the Rust test suite. Run it to regenerate
the constants pasted into crates/core/src/bounds.rs tests.
"""

from mpmath import mp, mpf, binomial, exp, log, e

mp.dps = 60


def mis_bound(k, k_prime, eps1, eps2, mu, delta):
    m = k - k_prime
    alpha = (1 - mpf(mu)) * m
    alpha_int = int(mpf(alpha))  # floor
    bad1 = exp(-mpf(1) / 6 * mu * (m - 1))
    v = (1 - mpf(mu)) / (10 * mpf(mu)) * k * mpf(eps2) ** ((mpf("0.5") - mu) * m - 1)
    t1 = k_prime * binomial(m, alpha_int - 1) * mpf(eps2) ** (alpha_int - 1)
    bad2 = (1 + 2 * v) * t1
    total = min(mpf(1), bad1 + bad2)
    print(f"k={k} k'={k_prime} eps1={eps1} eps2={eps2} mu={mu} delta={delta}")
    print(f"  m={m} alpha={alpha} alpha_int={alpha_int}")
    print(f"  eps1_limit = mu/m          = {mpf(mu)/m}")
    print(f"  eps2_limit = ((1-mu)m-1)/((1+delta)em) = {((1-mpf(mu))*m-1)/((1+mpf(delta))*e*m)}")
    print(f"  bad1  = {bad1}")
    print(f"  v     = {v}")
    print(f"  T1    = {t1}")
    print(f"  bad2  = {bad2}")
    print(f"  total = {total}")
    print()


def sampling_delta(eta, m, alpha, rounds):
    p_clean = (1 - mpf(eta)) ** m
    margin = p_clean - (1 - mpf(alpha))
    d = exp(-2 * rounds * margin**2)
    print(f"eta={eta} m={m} alpha={alpha} T={rounds}")
    print(f"  p_clean = {p_clean}")
    print(f"  margin  = {margin}")
    print(f"  delta   = {d}")
    print()
    return d


def min_rounds(p_clean, alpha, target):
    margin = mpf(p_clean) - (1 - mpf(alpha))
    t = log(1 / mpf(target)) / (2 * margin**2)
    print(f"p_clean={p_clean} alpha={alpha} target={target}")
    print(f"  raw T   = {t}")
    print(f"  ceil    = {int(mp.ceil(t))}")
    print()


def exp_weights(gamma, k):
    raw = [mpf(gamma) ** i for i in range(k)]
    s = sum(raw)
    print(f"exponential gamma={gamma} k={k}: sum={s}")
    for i, r in enumerate(raw):
        print(f"  w[{i}] = {r / s}")
    print()


print("== MIS failure bound ==")
mis_bound(20, 4, 0.01, 0.01, 0.25, 0.5)
mis_bound(20, 4, 0.0, 0.0, 0.25, 0.5)
mis_bound(15, 3, 0.01, 0.10, 0.25, 0.5)

print("== sampling failure probability ==")
sampling_delta(0.1, 2, 0.5, 20)
sampling_delta(0.1, 2, 0.5, 0)

print("== minimal rounds ==")
min_rounds(0.81, 0.5, 0.05)
min_rounds(0.51, 0.5, 0.05)

print("== exponential weights ==")
exp_weights(0.9, 3)
