"""Independent brute-force oracles used to cross-check the package.

Everything here is written in the most literal way possible (explicit
loops, no shared helpers with the package) so a bug in the implementation
cannot hide in its own test.
"""

from __future__ import annotations

import math


def oracle_precision(ranked_grades: list[int], k: int) -> float:
    hits = 0
    for i in range(k):
        if i < len(ranked_grades) and ranked_grades[i] > 0:
            hits += 1
    return hits / k


def oracle_dcg(grades: list[int], k: int) -> float:
    total = 0.0
    for i, g in enumerate(grades[:k], start=1):
        g = g if g > 0 else 0
        total += (2.0**g - 1.0) / (math.log(i + 1) / math.log(2))
    return total


def oracle_ndcg(ranked_grades: list[int], all_judged_grades: list[int], k: int) -> float:
    ideal = sorted((g if g > 0 else 0 for g in all_judged_grades), reverse=True)
    idcg = oracle_dcg(ideal, k)
    if idcg == 0.0:
        return 0.0
    return oracle_dcg(ranked_grades, k) / idcg


def oracle_err(ranked_grades: list[int], g_max: int, k: int) -> float:
    if g_max <= 0:
        return 0.0
    total = 0.0
    prob_reach = 1.0
    for i, g in enumerate(ranked_grades[:k], start=1):
        g = g if g > 0 else 0
        stop = (2.0**g - 1.0) / (2.0**g_max)
        total += prob_reach * stop / i
        prob_reach *= 1.0 - stop
    return total


def oracle_cosine(left: dict[str, int], right: dict[str, int]) -> float:
    dot = 0.0
    for term, count in left.items():
        dot += count * right.get(term, 0)
    nl = math.sqrt(sum(v * v for v in left.values()))
    nr = math.sqrt(sum(v * v for v in right.values()))
    if nl == 0.0 or nr == 0.0:
        return 0.0
    return dot / (nl * nr)
