"""Finite-resolution stationary actions.

A :class:`CellAction` is a finite weighted partition of the space into cells
together with, for each group word g, a table of transport pieces.  A piece
``(c -> c', T, W)`` records ``T = mu(c ∩ g^-1 c')`` and ``W = mu(g c ∩ c')``;
the Radon-Nikodym derivative of the pushed-forward measure g_*mu is taken to be
the constant ``T / W`` on the image piece ``g c ∩ c'``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import MalformedInputError, UnsupportedWordError, ValidationError
from .words import GroupWord, StepDistribution, inverse, multiply

WEIGHT_TOL = 1e-12
MARGINAL_TOL = 1e-10
STATIONARITY_TOL = 1e-9
ENTROPY_GATE_TOL = 1e-6
NEGLIGIBLE_MASS = 1e-15

KINDS = ("bijective", "markov", "opaque")


@dataclass(frozen=True)
class Cell:
    id: str
    weight: float


@dataclass(frozen=True)
class TransportPiece:
    source: str
    target: str
    source_mass: float
    image_mass: float

    @property
    def derivative(self) -> float:
        """Value of d(g_*mu)/dmu on the image piece."""
        return self.source_mass / self.image_mass


@dataclass(frozen=True)
class WordTransport:
    """Transport table of one word.

    ``exact`` is False when the table was obtained by mass-splitting
    composition outside a known Markov partition, in which case the masses are
    only an approximation of the true action.
    """

    word: GroupWord
    pieces: tuple[TransportPiece, ...]
    exact: bool = True

    def inverse(self) -> "WordTransport":
        return WordTransport(
            inverse(self.word),
            tuple(TransportPiece(p.target, p.source, p.image_mass, p.source_mass) for p in self.pieces),
            self.exact,
        )


def clean_pieces(pieces: Iterable[TransportPiece]) -> tuple[TransportPiece, ...]:
    """Drop numerically empty pieces and order the rest deterministically."""
    kept = [p for p in pieces if p.source_mass >= NEGLIGIBLE_MASS and p.image_mass >= NEGLIGIBLE_MASS]
    return tuple(kept)


def diagonal_transport(word: GroupWord, cells: Sequence[Cell]) -> WordTransport:
    return WordTransport(word, tuple(TransportPiece(c.id, c.id, c.weight, c.weight) for c in cells))


def compose_transports(first: WordTransport, then: WordTransport, weights: Mapping[str, float],
                       exact: bool | None = None) -> WordTransport:
    """Transport of ``then.word * first.word`` (apply ``first``, then ``then``).

    Mass splitting: a piece (c -> c'', T1, W1) chained with (c'' -> c', T2, W2)
    contributes (c -> c', T1*T2/w(c''), W1*W2/w(c'')).  This is exact for
    permutations of atoms and for Markov partitions.
    """
    by_source: dict[str, list[TransportPiece]] = defaultdict(list)
    for p in then.pieces:
        by_source[p.source].append(p)
    acc: dict[tuple[str, str], list[float]] = {}
    for p1 in first.pieces:
        mid = weights[p1.target]
        for p2 in by_source.get(p1.target, ()):
            key = (p1.source, p2.target)
            t = p1.source_mass * p2.source_mass / mid
            w = p1.image_mass * p2.image_mass / mid
            if key in acc:
                acc[key][0] += t
                acc[key][1] += w
            else:
                acc[key] = [t, w]
    pieces = clean_pieces(TransportPiece(s, d, t, w) for (s, d), (t, w) in acc.items())
    if exact is None:
        exact = first.exact and then.exact
    return WordTransport(multiply(then.word, first.word), pieces, exact)


class CellAction:
    """A stationary action of a free group at finite resolution.

    Parameters
    ----------
    cells : sequence of Cell
    m : StepDistribution
    transports : mapping GroupWord -> WordTransport
        Stored tables; must cover ``supp(m)`` unless ``composer`` can supply them.
    kind : {"bijective", "markov", "opaque"}
        How unstored words are obtained: exact relational composition for
        permutations of atoms, mass-splitting composition for Markov
        partitions, or not at all.
    composer : callable, optional
        Exact on-demand transport generator ``word -> WordTransport`` (used by
        the boundary models and by derived constructions).  Not serialized.
    """

    def __init__(self, cells: Sequence[Cell], m: StepDistribution,
                 transports: Mapping[GroupWord, WordTransport], kind: str = "markov", *,
                 composer: Callable[[GroupWord], WordTransport] | None = None,
                 ergodic: bool | None = None, label: str = ""):
        if kind not in KINDS:
            raise MalformedInputError(f"unknown action kind {kind!r}")
        self._cells = tuple(cells)
        self._m = m
        self._transports = dict(transports)
        self._kind = kind
        self._composer = composer
        self.ergodic = ergodic
        self.label = label
        self._index = {c.id: i for i, c in enumerate(self._cells)}
        self._weights = np.array([c.weight for c in self._cells], dtype=float)
        self._weight_of = {c.id: c.weight for c in self._cells}
        self._cache: dict[GroupWord, WordTransport] = {}
        self._matrix_cache: dict[GroupWord, np.ndarray] = {}
        self._cloud_cache: dict[tuple, object] = {}
        for w, tr in self._transports.items():
            if w.rank != m.rank or tr.word != w:
                raise MalformedInputError(f"transport table keyed {w} does not match its word {tr.word}")

    @property
    def cells(self) -> tuple[Cell, ...]:
        return self._cells

    @property
    def m(self) -> StepDistribution:
        return self._m

    @property
    def rank(self) -> int:
        return self._m.rank

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def transports(self) -> Mapping[GroupWord, WordTransport]:
        return dict(self._transports)

    @property
    def composer(self):
        return self._composer

    @property
    def cell_ids(self) -> list[str]:
        return [c.id for c in self._cells]

    @property
    def weights(self) -> np.ndarray:
        return self._weights.copy()

    @property
    def n_cells(self) -> int:
        return len(self._cells)

    def index_of(self, cell_id: str) -> int:
        return self._index[cell_id]

    def weight(self, cell_id: str) -> float:
        return self._weight_of[cell_id]

    def __repr__(self) -> str:
        tag = f" {self.label!r}" if self.label else ""
        return f"<CellAction{tag} kind={self._kind} cells={len(self._cells)} rank={self.rank}>"

    def with_transports(self, words: Iterable[GroupWord]) -> "CellAction":
        """Copy with the given words materialized into the stored tables."""
        stored = dict(self._transports)
        for w in words:
            stored.setdefault(w, word_transport(self, w))
        return CellAction(self._cells, self._m, stored, self._kind, composer=self._composer,
                          ergodic=self.ergodic, label=self.label)


def _factorize(word: GroupWord, available: Mapping[tuple[int, ...], GroupWord]) -> list[GroupWord] | None:
    """Split ``word`` into a concatenation of available letter strings, longest first."""
    letters = word.letters
    lengths = sorted({len(k) for k in available}, reverse=True)
    memo: dict[int, list[GroupWord] | None] = {}

    def go(pos: int):
        if pos == len(letters):
            return []
        if pos in memo:
            return memo[pos]
        memo[pos] = None
        for ln in lengths:
            chunk = letters[pos:pos + ln]
            if len(chunk) == ln and chunk in available:
                rest = go(pos + ln)
                if rest is not None:
                    memo[pos] = [available[chunk]] + rest
                    break
        return memo[pos]

    return go(0)


def word_transport(action: CellAction, w: GroupWord) -> WordTransport:
    """Transport table of ``w`` on ``action``.

    Stored tables are returned verbatim; the identity is diagonal; other words
    come from the action's exact composer if it has one, otherwise from
    composing stored tables (and their inverses).
    """
    if w.rank != action.rank:
        raise MalformedInputError(f"word {w} has rank {w.rank}, action has rank {action.rank}")
    stored = action._transports.get(w)
    if stored is not None:
        return stored
    cached = action._cache.get(w)
    if cached is not None:
        return cached
    if w.is_identity:
        tr = diagonal_transport(w, action.cells)
    elif action._composer is not None:
        tr = action._composer(w)
    elif action.kind == "opaque":
        raise UnsupportedWordError(f"opaque action has no stored transport for word {w}")
    else:
        available: dict[tuple[int, ...], GroupWord] = {}
        for v in action._transports:
            if not v.is_identity:
                available[v.letters] = v
                available.setdefault(inverse(v).letters, inverse(v))
        parts = _factorize(w, available)
        if parts is None:
            raise UnsupportedWordError(f"word {w} cannot be composed from the stored transports")
        tables = []
        for v in parts:
            if v in action._transports:
                tables.append(action._transports[v])
            else:
                tables.append(action._transports[inverse(v)].inverse())
        exact = action.kind == "bijective"
        tr = tables[-1]
        for t in reversed(tables[:-1]):
            tr = compose_transports(tr, t, action._weight_of, exact=exact and tr.exact and t.exact)
        tr = WordTransport(w, tr.pieces, tr.exact)
    action._cache[w] = tr
    return tr


def transport_matrix(action: CellAction, w: GroupWord) -> np.ndarray:
    """Dense K x K array of image masses: entry [c, c'] = mu(w c ∩ c')."""
    mat = action._matrix_cache.get(w)
    if mat is None:
        k = action.n_cells
        mat = np.zeros((k, k))
        for p in word_transport(action, w).pieces:
            mat[action._index[p.source], action._index[p.target]] += p.image_mass
        mat.setflags(write=False)
        action._matrix_cache[w] = mat
    return mat


def _mask(action: CellAction, ids: Iterable[str] | None) -> np.ndarray:
    mask = np.zeros(action.n_cells, dtype=bool)
    if ids is None:
        mask[:] = True
        return mask
    for cid in ids:
        try:
            mask[action._index[cid]] = True
        except KeyError:
            raise MalformedInputError(f"unknown cell id {cid!r}") from None
    return mask


def mass(action: CellAction, w: GroupWord, A: Iterable[str] | None, B: Iterable[str] | None) -> float:
    """mu(w A ∩ B) for unions of cells ``A`` and ``B`` (``None`` means all of X)."""
    mat = transport_matrix(action, w)
    a = _mask(action, A)
    b = _mask(action, B)
    return float(mat[np.ix_(a, b)].sum())


# --------------------------------------------------------------------------
# validation


@dataclass
class Violation:
    invariant: str
    detail: str
    residual: float = 0.0

    def __str__(self) -> str:
        return f"{self.invariant}: {self.detail} (residual {self.residual:.3e})"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    stationarity_residuals: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def max_stationarity_residual(self) -> float:
        return max(self.stationarity_residuals.values(), default=0.0)

    def summary(self) -> str:
        if self.ok:
            return f"valid (max stationarity residual {self.max_stationarity_residual:.3e})"
        return "\n".join(str(v) for v in self.violations)


def _check_table(action: CellAction, tr: WordTransport, report: ValidationReport) -> None:
    name = str(tr.word)
    seen = set()
    out_mass: dict[str, float] = defaultdict(float)
    in_mass: dict[str, float] = defaultdict(float)
    for p in tr.pieces:
        if p.source not in action._index or p.target not in action._index:
            report.violations.append(Violation("cells", f"word {name}: piece {p.source}->{p.target} names an unknown cell"))
            continue
        if (p.source, p.target) in seen:
            report.violations.append(Violation("unique-pieces", f"word {name}: duplicate piece {p.source}->{p.target}"))
        seen.add((p.source, p.target))
        if not (0 < p.source_mass <= 1 + WEIGHT_TOL and 0 < p.image_mass <= 1 + WEIGHT_TOL):
            report.violations.append(Violation("piece-masses", f"word {name}: piece {p.source}->{p.target} has T={p.source_mass!r}, W={p.image_mass!r}"))
        out_mass[p.source] += p.source_mass
        in_mass[p.target] += p.image_mass
    for c in action.cells:
        r = abs(out_mass.get(c.id, 0.0) - c.weight)
        if r > MARGINAL_TOL:
            report.violations.append(Violation("sourcing", f"word {name}: T out of cell {c.id}", r))
        r = abs(in_mass.get(c.id, 0.0) - c.weight)
        if r > MARGINAL_TOL:
            report.violations.append(Violation("covering", f"word {name}: W into cell {c.id}", r))
    if tr.word.is_identity:
        for p in tr.pieces:
            if p.source != p.target or abs(p.source_mass - p.image_mass) > WEIGHT_TOL:
                report.violations.append(Violation("identity", f"identity piece {p.source}->{p.target} is not diagonal"))


def validate(action: CellAction, tolerance: float = STATIONARITY_TOL) -> ValidationReport:
    """Check every structural invariant and stationarity at ``tolerance``.

    Stationarity is the identity sum_g m(g) mu(g c) = mu(c) for each cell c.
    """
    report = ValidationReport()
    ids = [c.id for c in action.cells]
    if len(set(ids)) != len(ids):
        report.violations.append(Violation("cells", "cell ids are not unique"))
    for c in action.cells:
        if not (0 < c.weight <= 1 + WEIGHT_TOL):
            report.violations.append(Violation("cells", f"cell {c.id} has weight {c.weight!r}"))
    total = float(np.sum(action._weights))
    if abs(total - 1.0) > WEIGHT_TOL:
        report.violations.append(Violation("weights", "cell weights do not sum to 1", abs(total - 1.0)))

    for tr in action._transports.values():
        _check_table(action, tr, report)

    image = defaultdict(float)
    for g, p in action.m.entries:
        try:
            tr = word_transport(action, g)
        except UnsupportedWordError:
            report.violations.append(Violation("support", f"no transport for support word {g}"))
            continue
        if g not in action._transports:
            _check_table(action, tr, report)
        for piece in tr.pieces:
            image[piece.source] += p * piece.image_mass
    for c in action.cells:
        r = abs(image.get(c.id, 0.0) - c.weight)
        report.stationarity_residuals[c.id] = r
        if r > tolerance:
            report.violations.append(Violation("stationarity", f"cell {c.id}", r))
    return report


def require_valid(action: CellAction, tolerance: float = ENTROPY_GATE_TOL) -> None:
    report = validate(action, tolerance)
    if not report.ok:
        raise ValidationError("action fails validation:\n" + report.summary(), report)


# --------------------------------------------------------------------------
# Radon-Nikodym data and entropy


def rn_pieces(action: CellAction, w: GroupWord) -> list[tuple[float, float]]:
    """Distribution of d(w_*mu)/dmu as (mass, value) pairs; masses sum to 1."""
    return [(p.image_mass, p.derivative) for p in word_transport(action, w).pieces]


def rn_distribution(action: CellAction, w: GroupWord, digits: int = 12) -> list[tuple[float, float]]:
    """:func:`rn_pieces` aggregated by derivative value, sorted by value."""
    acc: dict[float, float] = defaultdict(float)
    for mass_, value in rn_pieces(action, w):
        acc[round(value, digits)] += mass_
    return [(acc[v], v) for v in sorted(acc)]


def rn_tail(action: CellAction, w: GroupWord, c: float) -> float:
    """mu{x : d(w_*mu)/dmu(x) > c} (strict inequality)."""
    if c < 0:
        raise MalformedInputError("threshold must be nonnegative")
    return float(sum(m_ for m_, v in rn_pieces(action, w) if v > c))


def _word_entropy(tr: WordTransport) -> float:
    return math.fsum(p.image_mass * math.log(p.image_mass / p.source_mass) for p in tr.pieces)


def entropy_breakdown(action: CellAction) -> dict[GroupWord, float]:
    """Per-support-word contributions m(g) * int log(dmu / dg_*mu) dmu."""
    require_valid(action)
    return {g: p * _word_entropy(word_transport(action, g)) for g, p in action.m.entries}


def entropy(action: CellAction) -> float:
    """Furstenberg entropy in nats: -sum_g m(g) int log(d g_*mu / dmu) dmu."""
    return math.fsum(entropy_breakdown(action).values())


def rn_word_bound(action: CellAction, w: GroupWord) -> float:
    """Upper bound on d(w_*mu)/dmu derived from stationarity alone.

    Stationarity gives s_*mu >= m(s) mu for s in supp(m), hence
    d(s^-1)_*mu/dmu <= 1/m(s).  Writing w = s_1^-1 ... s_k^-1 with each s_i in
    supp(m), the chain rule bounds the derivative by prod 1/m(s_i).  Returns
    ``inf`` when no such factorization exists.
    """
    if w.is_identity:
        return 1.0
    probs = action.m.as_dict()
    available = {inverse(s).letters: inverse(s) for s in probs if not s.is_identity}
    parts = _factorize(w, available)
    if parts is None:
        return math.inf
    bound = 1.0
    for v in parts:
        bound /= probs[inverse(v)]
    return bound


def max_transport_gap(action: CellAction) -> float:
    """max |T - W| over the pieces of every support word."""
    gap = 0.0
    for g in action.m.support:
        for p in word_transport(action, g).pieces:
            gap = max(gap, abs(p.source_mass - p.image_mass))
    return gap
