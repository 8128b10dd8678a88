"""Pareto extraction, 2-D dominated hypervolume and rank summaries."""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .evo import dominates


def pareto_front(points) -> list[int]:
    """Indices of the nondominated points (minimization, weak dominance).

    Duplicates collapse to the lowest original index.
    """
    pts = [tuple(p) for p in points]
    seen = {}
    keep = []
    for i, a in enumerate(pts):
        if any(dominates(b, a) for b in pts):
            continue
        if a in seen:
            continue
        seen[a] = i
        keep.append(i)
    return keep


def hypervolume_2d(points, ref=(1.0, 1.0)) -> float:
    """Area dominated by a 2-D point set relative to ``ref`` (minimization).

    Points beyond the reference are clipped and contribute zero area.
    Computed exactly by a staircase sweep over the nondominated set.
    """
    pts = np.asarray([p for p in points], dtype=float)
    if pts.size == 0:
        return 0.0
    pts = np.minimum(pts, np.asarray(ref, dtype=float))
    idx = pareto_front([tuple(p) for p in pts])
    front = pts[idx]
    order = np.argsort(front[:, 0], kind="stable")
    front = front[order]
    area = 0.0
    prev_y = ref[1]
    for x, y in front:
        area += (ref[0] - x) * (prev_y - y)
        prev_y = y
    return float(area)


def generalization_domhv(optim_points, test_points, ref=(1.0, 1.0)) -> float:
    """Hypervolume of the optim-selected Pareto set re-scored on test data.

    The selection happens on ``optim_points``; the selected individuals'
    ``test_points`` coordinates (which may dominate each other) are then
    measured against the reference.
    """
    optim_points = list(optim_points)
    test_points = list(test_points)
    if len(optim_points) != len(test_points):
        raise ValueError("need one test objective pair per reported point")
    selected = pareto_front(optim_points)
    return hypervolume_2d([test_points[i] for i in selected], ref=ref)


def rank_summary(results: dict) -> dict:
    """Average rank per method over a complete (dataset, learner, fold) grid.

    ``results`` maps (method, dataset, learner, fold) to a
    generalization-hypervolume value; higher is better and gets rank 1.
    Ties receive their average rank.  An incomplete grid is an error
    naming the missing cells.
    """
    methods = sorted({k[0] for k in results})
    cells = sorted({k[1:] for k in results})
    missing = [(m,) + c for m in methods for c in cells if (m,) + c not in results]
    if missing:
        raise ValueError(f"incomplete result grid, missing cells: {missing}")
    totals = defaultdict(float)
    for cell in cells:
        values = np.array([results[(m,) + cell] for m in methods])
        order = (-values).argsort(kind="stable")
        ranks = np.empty(len(methods))
        ranks[order] = np.arange(1, len(methods) + 1)
        # average tied ranks
        for v in np.unique(values):
            tied = values == v
            ranks[tied] = ranks[tied].mean()
        for m, r in zip(methods, ranks):
            totals[m] += r
    return {m: float(totals[m] / len(cells)) for m in methods}
