"""Brute-force reference implementations, written independently of the package.

Everything here favors plain loops and textbook definitions over speed.
"""

import math
from collections import Counter

import numpy as np


def wd_transport(a, b):
    """W1 by exhaustive transport of sorted unit masses (north-west corner rule).

    Each sample of ``a`` carries mass 1/len(a), each of ``b`` 1/len(b). In 1D
    the monotone coupling is optimal, so moving mass greedily in sorted order
    gives the exact distance. Masses are handled as exact fractions.
    """
    from fractions import Fraction

    a, b = sorted(float(v) for v in a), sorted(float(v) for v in b)
    ma = [Fraction(1, len(a))] * len(a)
    mb = [Fraction(1, len(b))] * len(b)
    i = j = 0
    total = 0.0
    while i < len(a) and j < len(b):
        m = min(ma[i], mb[j])
        total += float(m) * abs(a[i] - b[j])
        ma[i] -= m
        mb[j] -= m
        if ma[i] == 0:
            i += 1
        if mb[j] == 0:
            j += 1
    return total


def js_direct(p, q):
    cp, cq = Counter(p), Counter(q)
    total = 0.0
    for k in set(cp) | set(cq):
        P = cp[k] / len(p)
        Q = cq[k] / len(q)
        M = (P + Q) / 2
        if P > 0:
            total += 0.5 * P * math.log2(P / M)
        if Q > 0:
            total += 0.5 * Q * math.log2(Q / M)
    return total


def pearson_definition(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((x[i] - mx) * (y[i] - my) for i in range(n))
    sxx = sum((v - mx) ** 2 for v in x)
    syy = sum((v - my) ** 2 for v in y)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


def entropy_count(x):
    n = len(x)
    return -sum(c / n * math.log(c / n) for c in Counter(x).values())


def theils_u_count(x, y):
    """U(X|Y) from joint counts."""
    n = len(x)
    hx = entropy_count(x)
    if hx == 0:
        return 1.0
    joint = Counter(zip(x, y))
    ycount = Counter(y)
    hxy = -sum(c / n * math.log(c / ycount[yv]) for (xv, yv), c in joint.items())
    return (hx - hxy) / hx


def corr_ratio_loops(cats, vals):
    n = len(vals)
    mean = sum(vals) / n
    total = sum((v - mean) ** 2 for v in vals)
    if total == 0:
        return 0.0
    groups = {}
    for c, v in zip(cats, vals):
        groups.setdefault(c, []).append(v)
    between = sum(len(g) * (sum(g) / len(g) - mean) ** 2 for g in groups.values())
    return math.sqrt(between / total)


def dcr_double_loop(R, S):
    out = []
    for s in S:
        best = math.inf
        for r in R:
            best = min(best, math.sqrt(sum((a - b) ** 2 for a, b in zip(r, s))))
        out.append(best)
    return np.array(out)
