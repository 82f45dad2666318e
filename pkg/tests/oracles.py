"""Brute-force reference implementations used only by the tests.

Each oracle follows a different route from the package code: permanents by
summing over permutations, bosonic amplitudes by expanding creation
operators over every photon routing, classical laws by enumerating routings.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np

from bosonsig.optics import configurations


def naive_permanent(a) -> complex:
    a = np.asarray(a)
    k = a.shape[0]
    return complex(sum(np.prod([a[i, p[i]] for i in range(k)]) for p in itertools.permutations(range(k))))


def _occ(route, m):
    occ = [0] * m
    for j in route:
        occ[j] += 1
    return tuple(occ)


def bosonic_oracle(u, modes) -> np.ndarray:
    """Expand prod_k (sum_j U[j, s_k] a_j^dag) |0> over all m**n routings.

    A product of creation operators with occupation t acting on vacuum gives
    sqrt(prod t!) |t>; the input normalisation is 1/sqrt(prod s!).
    """
    u = np.asarray(u)
    m = u.shape[0]
    cols = [s - 1 for s in modes]
    n = len(cols)
    amp = defaultdict(complex)
    for route in itertools.product(range(m), repeat=n):
        amp[_occ(route, m)] += np.prod([u[route[k], cols[k]] for k in range(n)])
    s_fact = math.prod(math.factorial(c) for c in _occ(cols, m))
    table = configurations(n, m)
    out = np.zeros(len(table))
    for occ, a in amp.items():
        t_fact = math.prod(math.factorial(t) for t in occ)
        out[table.index[occ]] = abs(a) ** 2 * t_fact / s_fact
    return out


def distinguishable_oracle(u, modes) -> np.ndarray:
    """Each photon routes on its own with probability |U[j, s]|^2."""
    u = np.asarray(u)
    m = u.shape[0]
    cols = [s - 1 for s in modes]
    table = configurations(len(cols), m)
    out = np.zeros(len(table))
    for route in itertools.product(range(m), repeat=len(cols)):
        out[table.index[_occ(route, m)]] += np.prod([abs(u[route[k], cols[k]]) ** 2 for k in range(len(cols))])
    return out


def grouping_oracle(u, modes, partition) -> np.ndarray:
    """Blocks interfere internally and combine as independent classical parts."""
    u = np.asarray(u)
    m = u.shape[0]
    parts = []
    for block in partition:
        sub = [modes[k - 1] for k in block]
        probs = bosonic_oracle(u, sub)
        occs = configurations(len(sub), m).occupations
        parts.append([(tuple(o), p) for o, p in zip(occs.tolist(), probs)])
    table = configurations(len(modes), m)
    out = np.zeros(len(table))
    for combo in itertools.product(*parts):
        occ = tuple(np.sum([np.array(o) for o, _ in combo], axis=0))
        out[table.index[occ]] += math.prod(p for _, p in combo)
    return out


def cascade_all_distinct(port_probs, photons: int) -> float:
    """Probability that ``photons`` photons land on pairwise distinct ports."""
    total = 0.0
    for route in itertools.product(range(len(port_probs)), repeat=photons):
        if len(set(route)) == photons:
            total += math.prod(port_probs[r] for r in route)
    return total


def tvd(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
