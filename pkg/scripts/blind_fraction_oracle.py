#!/usr/bin/env python3
"""Derive the long-run blind-step fraction of the injection process and check
it by simulation.

Model: at every step outside a blind stretch, a stretch of exactly N steps
starts with probability q = p/N (the triggering step is the first blind one).
A renewal cycle is (geometric failures before success) + N blind steps:

    E[sighted] = (1-q)/q,   E[cycle] = (1-q)/q + N
    blind fraction = N / E[cycle] = N q / (1 - q + N q)

Back-to-back stretches are legal: the step after a stretch may trigger again.
"""

import argparse

import numpy as np


def closed_form(p, n):
    if p == 0:
        return 0.0
    q = p / n
    return n * q / (1.0 - q + n * q)


def simulate(p, n, steps, seed=0):
    rng = np.random.default_rng(seed)
    q = p / n
    blind_left = 0
    blind = 0
    for _ in range(steps):
        if blind_left == 0 and rng.random() < q:
            blind_left = n
        if blind_left > 0:
            blind_left -= 1
            blind += 1
    return blind / steps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=1_000_000)
    args = parser.parse_args()
    print(f"{'p':>5} {'N':>3} {'closed form':>12} {'simulated':>12} {'abs diff':>10}")
    for p, n in [(0.5, 1), (0.5, 5), (0.5, 12), (0.9, 3), (0.2, 10), (0.0, 5)]:
        expect = closed_form(p, n)
        got = simulate(p, n, args.steps)
        print(f"{p:>5} {n:>3} {expect:>12.6f} {got:>12.6f} {abs(expect - got):>10.6f}")


if __name__ == "__main__":
    main()
