"""Slow, obviously-correct reference computations used as test oracles."""

import itertools
import math
from collections import Counter, defaultdict


def blocks_of(labels):
    out = defaultdict(set)
    for i, b in enumerate(labels):
        out[b].add(i)
    return list(out.values())


def block_containing(labels, d):
    return {i for i, b in enumerate(labels) if b == labels[d]}


def brute_cover(target, views, ceiling):
    """Cheapest sub-family by trying every subset of views."""
    target = set(target)
    if not target:
        return 0.0
    best = None
    for r in range(len(views) + 1):
        for combo in itertools.combinations(views, r):
            cov = set().union(*(set(s) for s, _ in combo)) if combo else set()
            if target <= cov:
                cost = sum(p for _, p in combo)
                best = cost if best is None else min(best, cost)
    return float(ceiling) if best is None else float(best)


def dit_pairs(labels):
    n = len(labels)
    return sum(1 for i in range(n) for j in range(n) if labels[i] != labels[j])


def shannon_def(labels, probs):
    mass = Counter()
    for i, b in enumerate(labels):
        mass[b] += probs[i]
    return -sum(m * math.log2(m) for m in mass.values() if m > 0)


def tsallis_def(labels, probs, q):
    mass = Counter()
    for i, b in enumerate(labels):
        mass[b] += probs[i]
    return (1 - sum(m**q for m in mass.values())) / (q - 1)


def guessing_entropy(probs):
    ps = sorted(probs, reverse=True)
    return sum((k + 1) * p for k, p in enumerate(ps))


def guessing_def(labels, probs):
    """G(X) - sum_B p_B G(X | B) with conditional distributions."""
    by = defaultdict(list)
    for i, b in enumerate(labels):
        by[b].append(probs[i])
    cond = 0.0
    for ps in by.values():
        pb = sum(ps)
        if pb > 0:
            cond += pb * guessing_entropy([p / pb for p in ps])
    return guessing_entropy(probs) - cond


def min_entropy_def(labels, probs):
    by = defaultdict(float)
    for i, b in enumerate(labels):
        by[b] = max(by[b], probs[i])
    return math.log2(sum(by.values()) / max(probs))


def beta_def(labels, beta):
    """log2 of the number of successful guesses summed over blocks."""
    return math.log2(sum(min(beta, len(B)) for B in blocks_of(labels)))


def naive_violations(rows, prices, members, pairs, mode, eps, n):
    """Raw (condition, q1, q2, d) cells by direct pairwise enumeration.

    ``rows`` holds label lists, ``prices[r]`` a float (qps) or list (aps).
    """
    out = []
    def refines(a, b):
        return all(block_containing(rows[a], x) <= block_containing(rows[b], x) for x in range(n))

    for q2 in range(members):
        for q1 in range(members):
            if q1 == q2:
                continue
            if mode == "qps":
                if refines(q2, q1) and prices[q1] > prices[q2] + eps:
                    out.append(("info", q1, q2, None))
            else:
                for d in range(n):
                    if block_containing(rows[q2], d) <= block_containing(rows[q1], d) and prices[q1][d] > prices[q2][d] + eps:
                        out.append(("info", q1, q2, d))
    for i, j, u in pairs:
        if mode == "qps":
            if prices[u] > prices[i] + prices[j] + eps:
                out.append(("bundle", i, j, None))
        else:
            for d in range(n):
                if prices[u][d] > prices[i][d] + prices[j][d] + eps:
                    out.append(("bundle", i, j, d))
    return out
