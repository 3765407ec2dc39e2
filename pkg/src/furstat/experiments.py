"""Desk-scale experiments: entropy continuity along convex families, entropy
realization sweeps, and a randomized harness for the two-sided matching bound.

Each experiment returns an :class:`ExperimentResult` whose rows are written as
CSV by :func:`write_csv`; reals use 17 significant digits and the first line
is a ``#`` comment carrying tool version, seed and truncation data.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from typing import Any, Sequence

import numpy as np

from . import __version__
from .action import CellAction, entropy, require_valid, rn_tail
from .errors import MalformedInputError, RangeError, ValidationError
from .geometry import DEFAULT_BUDGET, OrderedPartition, delta, tail_bound
from .matching import prop2_construct
from .models import (
    BoundarySpec,
    boundary_action,
    convex_combine,
    finite_bijective,
    stationary_simplex,
    trivial_action,
)
from .words import GroupWord, StepDistribution, alphabet

KINDS = ("continuity", "realization", "prop2-suite")
AFFINITY_TOL = 1e-12


@dataclass
class ExperimentConfig:
    kind: str = "continuity"
    rank: int = 2
    depth: int = 1
    measure: str | None = None
    trivial_weights: tuple[float, ...] = (1.0,)
    t_grid: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    t_ref: float = 0.5
    M: int = 6
    N: int = 6
    mode: str = "exact"
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    rn_word: str = "a"
    thresholds: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0)
    ranks: tuple[int, ...] = (2, 3)
    depths: tuple[int, ...] = (1, 2)
    mixing: tuple[float, ...] = (0.25, 0.5, 0.75)
    targets: tuple[float, ...] = ()
    trials: int = 100
    cells: int = 6
    epsilon: float = 1.0
    output: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MalformedInputError(f"experiment kind must be one of {KINDS}")
        grid = list(self.t_grid)
        if any(not 0 < t < 1 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise MalformedInputError("t grid must be strictly increasing inside (0, 1)")
        if not 0 < self.t_ref < 1:
            raise MalformedInputError("t_ref must lie in (0, 1)")
        if self.budget < 1 or self.M < 1 or self.N < 1 or self.trials < 1:
            raise MalformedInputError("budgets, truncation bounds and trial counts must be positive")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise MalformedInputError(f"unknown config keys: {sorted(unknown)}")
        clean = {}
        for k, v in data.items():
            clean[k] = tuple(v) if isinstance(v, list) else v
        return cls(**clean)


@dataclass
class ExperimentResult:
    kind: str
    columns: list[str]
    rows: list[list[Any]]
    header: dict[str, Any] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def column(self, name: str) -> list[Any]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    meta = " ".join(f"{k}={_fmt(v)}" for k, v in result.header.items())
    buf.write(f"# furstat {__version__} experiment={result.kind} {meta}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def parse_measure(text: str | None, rank: int) -> StepDistribution:
    """``"a:0.3,a^-1:0.2,..."``; None or "uniform" gives the simple random walk."""
    if text is None or text.strip() in ("", "uniform"):
        return StepDistribution.uniform(rank)
    pairs = []
    for item in text.split(","):
        word, _, prob = item.rpartition(":")
        if not word:
            raise MalformedInputError(f"bad measure entry {item!r}; expected word:prob")
        try:
            pairs.append((word.strip(), float(prob)))
        except ValueError:
            raise MalformedInputError(f"bad probability in {item!r}") from None
    return StepDistribution.from_pairs(pairs, rank)


def boundary_entropy_closed_form(rank: int) -> float:
    """Entropy of the simple random walk boundary: ((r-1)/r) ln(2r-1)."""
    return (rank - 1) / rank * math.log(2 * rank - 1)


def random_bijective_action(n_cells: int, m: StepDistribution, rng: np.random.Generator) -> CellAction:
    """Random permutations for each generator with random stationary weights."""
    perms = {i: rng.permutation(n_cells) for i in range(1, m.rank + 1)}
    simplex = stationary_simplex(perms, m, n_cells)
    return finite_bijective(perms, simplex.sample(rng), m)


def run_continuity(cfg: ExperimentConfig) -> ExperimentResult:
    """Entropy and delta along a_t = t * boundary + (1 - t) * trivial."""
    m = parse_measure(cfg.measure, cfg.rank)
    a = boundary_action(BoundarySpec(cfg.rank, cfg.depth, m))
    b = trivial_action(cfg.trivial_weights, m)
    h_a, h_b = entropy(a), entropy(b)
    word = GroupWord.parse(cfg.rn_word, cfg.rank)
    thresholds = [float(c) for c in cfg.thresholds]
    tails_a = [rn_tail(a, word, c) for c in thresholds]
    tails_b = [rn_tail(b, word, c) for c in thresholds]
    rn_const = max((abs(x - y) for x, y in zip(tails_a, tails_b)), default=0.0)
    lip = abs(h_a - h_b)

    grid = sorted(set(cfg.t_grid) | {cfg.t_ref})
    ref = convex_combine(a, b, cfg.t_ref)
    h_ref = entropy(ref)
    tails_ref = [rn_tail(ref, word, c) for c in thresholds]

    rows = []
    deltas = []
    affine = lipschitz = rn_ok = True
    bound = tail_bound(cfg.M, cfg.N)
    for t in grid:
        at = convex_combine(a, b, t)
        try:
            require_valid(at)
        except ValidationError as exc:
            raise ValidationError(f"family member t={t!r} does not validate:\n{exc}", exc.report) from None
        h = entropy(at)
        rep = delta(at, ref, cfg.M, cfg.N, cfg.mode, cfg.budget, cfg.seed)
        if rep.errors:
            raise MalformedInputError(f"delta at t={t!r} has uncomputed terms: {rep.errors}")
        tails = [rn_tail(at, word, c) for c in thresholds]
        sup_gap = max((abs(x - y) for x, y in zip(tails, tails_ref)), default=0.0)
        gap = abs(h - h_ref)
        affine &= abs(h - (t * h_a + (1 - t) * h_b)) <= AFFINITY_TOL
        lipschitz &= gap <= lip * abs(t - cfg.t_ref) + AFFINITY_TOL
        rn_ok &= sup_gap <= 2 * abs(t - cfg.t_ref) * rn_const + AFFINITY_TOL
        deltas.append(rep.truncated_value)
        rows.append([t, rep.truncated_value, rep.tail_bound, h, gap, sup_gap] + tails)

    i_ref = grid.index(cfg.t_ref)
    left = all(deltas[i] >= deltas[i + 1] - bound for i in range(i_ref))
    right = all(deltas[i] <= deltas[i + 1] + bound for i in range(i_ref, len(grid) - 1))
    strict_left = all(deltas[i] > deltas[i + 1] for i in range(i_ref))
    strict_right = all(deltas[i] < deltas[i + 1] for i in range(i_ref, len(grid) - 1))
    columns = ["t", "delta", "tail_bound", "entropy", "entropy_gap", "rn_tail_sup_gap"]
    columns += [f"rn_tail[{_fmt(c)}]" for c in thresholds]
    header = {
        "seed": cfg.seed, "M": cfg.M, "N": cfg.N, "tail_bound": bound, "mode": cfg.mode, "budget": cfg.budget,
        "family": f"t*boundary(r={cfg.rank},L={cfg.depth})+(1-t)*trivial({len(cfg.trivial_weights)})",
        "t_ref": cfg.t_ref, "entropy_a": h_a, "entropy_b": h_b, "rn_word": str(word).replace(" ", ""),
        "rn_constant": rn_const,
    }
    checks = {
        "entropy_affine": affine,
        "entropy_lipschitz": lipschitz,
        "delta_zero_at_ref": deltas[i_ref] == 0.0,
        "delta_monotone_to_ref": left and right,
        "delta_strictly_monotone": strict_left and strict_right,
        "rn_tail_converges": rn_ok,
    }
    return ExperimentResult("continuity", columns, rows, header, checks)


def _biased_measure(rank: int) -> StepDistribution:
    # generators twice as likely as their inverses
    raw = {x: (2.0 if x > 0 else 1.0) for x in alphabet(rank)}
    total = sum(raw.values())
    return StepDistribution.nearest_neighbor({x: v / total for x, v in raw.items()}, rank)


def realize_entropy(base: CellAction, target: float, trivial_weights: Sequence[float] = (1.0,)) -> tuple[CellAction, float]:
    """An action of entropy ``target`` from ``base`` and a trivial action.

    Returns (action, t).  Intermediate values are realized by the convex
    combination t * base + (1 - t) * trivial with t = target / h(base), which
    is not ergodic.
    """
    h = entropy(base)
    if not (0.0 <= target <= h) or math.isnan(target):
        raise RangeError(f"target entropy {target!r} outside the achievable range [0, {h!r}]")
    triv = trivial_action(trivial_weights, base.m)
    if target == 0.0:
        return triv, 0.0
    if target == h:
        return base, 1.0
    t = target / h
    return convex_combine(base, triv, t), t


def run_realization(cfg: ExperimentConfig) -> ExperimentResult:
    """Sweep realized entropies over boundary models and their mixtures."""
    rows = []
    uniform_by_rank = {}
    for rank in cfg.ranks:
        measures = [("uniform", StepDistribution.uniform(rank)), ("biased", _biased_measure(rank))]
        for depth in cfg.depths:
            for label, m in measures:
                act = boundary_action(BoundarySpec(rank, depth, m))
                h = entropy(act)
                closed = boundary_entropy_closed_form(rank) if label == "uniform" else ""
                if label == "uniform":
                    uniform_by_rank.setdefault(rank, h)
                rows.append([f"boundary-r{rank}-L{depth}-{label}", "boundary", act.ergodic, rank, depth, label, 1.0, h, closed])
        base = boundary_action(BoundarySpec(rank, min(cfg.depths)))
        for t in cfg.mixing:
            act = convex_combine(base, trivial_action((1.0,), base.m), t)
            rows.append([f"mix-r{rank}-t{_fmt(t)}", "combination", act.ergodic, rank, min(cfg.depths), "uniform", t, entropy(act), ""])
    base = boundary_action(BoundarySpec(cfg.rank, cfg.depth, parse_measure(cfg.measure, cfg.rank)))
    for target in cfg.targets:
        act, t = realize_entropy(base, float(target), cfg.trivial_weights)
        kind = "trivial" if t == 0.0 else ("boundary" if t == 1.0 else "combination")
        rows.append([f"target-{_fmt(float(target))}", kind, bool(act.ergodic), cfg.rank, cfg.depth, "target", t, entropy(act), float(target)])
    hs = [uniform_by_rank[r] for r in sorted(uniform_by_rank)]
    checks = {
        "uniform_entropy_increasing_in_rank": all(x < y for x, y in zip(hs, hs[1:])),
        "closed_form_match": all(abs(r[7] - r[8]) <= 1e-9 for r in rows if r[5] == "uniform" and r[1] == "boundary"),
    }
    columns = ["model_id", "family", "ergodic", "rank", "depth", "measure", "t", "entropy", "reference"]
    header = {"seed": cfg.seed, "M": cfg.M, "N": cfg.N, "tail_bound": tail_bound(cfg.M, cfg.N)}
    return ExperimentResult("realization", columns, rows, header, checks)


def run_prop2_suite(cfg: ExperimentConfig) -> ExperimentResult:
    """Random pairs of bijective actions; check two-sided <= 7 * one-sided every time."""
    rng = np.random.default_rng(cfg.seed)
    m = StepDistribution.uniform(cfg.rank)
    F = [GroupWord.identity(cfg.rank), GroupWord.generator(1, cfg.rank)]
    rows = []
    for trial in range(cfg.trials):
        a = random_bijective_action(cfg.cells, m, rng)
        b = random_bijective_action(cfg.cells, m, rng)
        part = OrderedPartition.from_labels(a, rng.integers(0, 2, size=cfg.cells), 2)
        res = prop2_construct(a, b, F, part, cfg.epsilon, budget=cfg.budget, seed=cfg.seed + trial)
        rows.append([trial, res.delta, res.two_sided, 7 * res.delta, res.certificate["bound_holds"], res.certified])
    checks = {"bound_never_violated": all(r[4] for r in rows)}
    columns = ["trial", "one_sided_delta", "two_sided", "seven_delta", "bound_holds", "certified"]
    header = {"seed": cfg.seed, "M": cfg.M, "N": cfg.N, "tail_bound": tail_bound(cfg.M, cfg.N),
              "cells": cfg.cells, "epsilon": cfg.epsilon, "budget": cfg.budget}
    return ExperimentResult("prop2-suite", columns, rows, header, checks)


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return {"continuity": run_continuity, "realization": run_realization,
            "prop2-suite": run_prop2_suite}[cfg.kind](cfg)
