"""Depth-first interpreter that solves shape rules against an image.

Point variables range over a grid of candidate pixel corners. Builtin goals
with unbound point arguments enumerate candidates for them; when a later
goal in the conjunction already pins the free point to a locus (a disk from
``len(p, q, d), d < c`` or a wedge from ``angle(p, q, r, a), a = c``), only
lattice points on that locus are enumerated.

Complete solutions are scored by a weighted sum of the strengths of their
``line`` goals. Comparisons are hard constraints; the score only ranks the
solutions that satisfy them. An admissible bound (every strength is at most
1) prunes branches that cannot enter the current top-K.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .dsl import BUILTINS, Call, Comparison, Num, Query, RuleSet, Var, parse_query, validate_recursion
from .geometry import MIN_SEGMENT_LENGTH, LineParams, angle, length, line
from .raster import GrayImage, Point

log = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-9


class SolverError(Exception):
    pass


class UnknownPredicateError(SolverError):
    pass


class InstantiationError(SolverError):
    """A comparison or query variable was read before anything bound it."""


@dataclass(frozen=True)
class CandidateConfig:
    """Where point variables may land.

    ``sampling_step`` is the lattice spacing used for look-ahead loci; it
    defaults to ``stride``, in which case every look-ahead candidate is also
    a plain grid candidate.
    """

    stride: int = 4
    angle_tolerance: float = 3.0
    length_tolerance: float = 2.0
    sampling_step: Optional[int] = None
    generative: bool = True

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.sampling_step is not None and self.sampling_step < 1:
            raise ValueError(f"sampling step must be >= 1, got {self.sampling_step}")
        if not (self.angle_tolerance > 0 and self.length_tolerance > 0):
            raise ValueError("tolerances must be positive")

    @property
    def step(self) -> int:
        return self.sampling_step if self.sampling_step is not None else self.stride


@dataclass(frozen=True)
class SearchLimits:
    max_depth: int = 8
    max_expansions: int = 10_000_000
    top_k: int = 10
    nms_radius: float = 5.0
    prune: bool = True

    def __post_init__(self):
        if self.max_depth < 1 or self.max_expansions < 1 or self.top_k < 1:
            raise ValueError("depth bound, expansion budget and top-K must be >= 1")
        if not self.nms_radius > 0:
            raise ValueError("NMS radius must be positive")


class ScoreWeights:
    """Per-rule convolution weights over the ``line`` goals of a derivation.

    Rules without an entry get uniform weights ``1/k``.
    """

    def __init__(self, per_rule: Optional[Mapping[str, Sequence[float]]] = None):
        self.per_rule = {}
        for name, ws in (per_rule or {}).items():
            ws = tuple(float(w) for w in ws)
            if any(w < 0 or not math.isfinite(w) for w in ws):
                raise ValueError(f"weights for {name!r} must be finite and non-negative")
            if ws and not any(w > 0 for w in ws):
                raise ValueError(f"weights for {name!r} need at least one positive entry")
            self.per_rule[name] = ws

    def for_rule(self, name: str, k: int) -> tuple[float, ...]:
        if name in self.per_rule:
            ws = self.per_rule[name]
            if len(ws) != k:
                raise ValueError(f"rule {name!r} has {k} line goals but {len(ws)} weights are configured")
            return ws
        return (1.0 / k,) * k if k else ()

    def __repr__(self):
        return f"ScoreWeights({self.per_rule!r})"


@dataclass(frozen=True)
class SolverContext:
    image: GrayImage
    params: LineParams = field(default_factory=LineParams)
    candidates: CandidateConfig = field(default_factory=CandidateConfig)
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    limits: SearchLimits = field(default_factory=SearchLimits)


class Segment(NamedTuple):
    start: Point
    end: Point
    strength: float


@dataclass(frozen=True)
class Detection:
    bindings: dict
    segments: tuple
    score: float
    scalars: dict = field(default_factory=dict)

    @property
    def points(self) -> tuple:
        return tuple(self.bindings.values())


class Detections(list):
    """Ranked detections plus search statistics."""

    def __init__(self, items=(), truncated=False, depth_exceeded=0, expansions=0, pruned=0):
        super().__init__(items)
        self.truncated = truncated
        self.depth_exceeded = depth_exceeded
        self.expansions = expansions
        self.pruned = pruned


# ---------------------------------------------------------------- scoring


def score(strengths: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted sum of segment strengths."""
    if len(strengths) != len(weights):
        raise ValueError(f"{len(strengths)} strengths vs {len(weights)} weights")
    total = 0.0
    for b, w in zip(strengths, weights):
        total += w * b
    return total


PRUNE = "prune"
CONTINUE = "continue"


def bound_and_prune(partial: float, remaining_weights: Sequence[float], incumbent: float) -> str:
    """Decide whether a partial solution can still reach ``incumbent``.

    Every remaining strength is at most 1, so the best completion scores at
    most ``partial + sum(remaining_weights)``.
    """
    bound = partial + sum(remaining_weights)
    return PRUNE if bound < incumbent else CONTINUE


# ---------------------------------------------------------------- candidates


def candidate_points(ctx: SolverContext) -> list[Point]:
    """Row-major grid of candidate points with spacing ``stride``."""
    return _lattice(ctx.image, ctx.candidates.stride)


def _lattice(img: GrayImage, step: int) -> list[Point]:
    return [Point(x, y) for y in range(0, img.height, step) for x in range(0, img.width, step)]


class _Scalar(NamedTuple):
    value: float
    kind: str  # "line", "angle", "len" or "num"


def _tolerance(kinds, cfg: CandidateConfig) -> float:
    if "angle" in kinds:
        return cfg.angle_tolerance
    if "len" in kinds:
        return cfg.length_tolerance
    return EXACT_TOLERANCE


def _holds(lhs: float, op: str, rhs: float, tol: float, circular: bool) -> bool:
    if op == "=":
        d = abs(lhs - rhs)
        if circular:
            d = d % 360.0
            d = min(d, 360.0 - d)
        return d <= tol
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    if op == ">=":
        return lhs >= rhs
    raise ValueError(f"unknown comparison {op!r}")


def _compare(a: _Scalar, op: str, b: _Scalar, cfg: CandidateConfig) -> bool:
    kinds = (a.kind, b.kind)
    return _holds(a.value, op, b.value, _tolerance(kinds, cfg), "angle" in kinds)


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}


@dataclass(frozen=True)
class LengthConstraint:
    """The free point must satisfy ``len(anchor, free) <op> value``.

    For ``<`` and ``<=`` the emitted disk is widened by ``slack``; for ``=``
    the annulus ``|len - value| <= slack`` is emitted.
    """

    anchor: Point
    op: str
    value: float
    slack: float

    def accepts(self, p: Point) -> bool:
        d = length(self.anchor, p)
        if self.op == "=":
            return abs(d - self.value) <= self.slack
        return d <= self.value + self.slack

    def prefilter(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        d = np.hypot(xs - self.anchor[0], ys - self.anchor[1])
        if self.op == "=":
            return np.abs(d - self.value) <= self.slack + 1e-6
        return d <= self.value + self.slack + 1e-6


@dataclass(frozen=True)
class AngleConstraint:
    """The free point must satisfy ``angle(*points) = value`` within tolerance.

    ``points`` holds the three vertex arguments with ``None`` in the slot of
    the free point, which is either the first or the last argument.
    """

    points: tuple
    value: float
    tolerance: float

    def _full(self, p: Point) -> tuple:
        return tuple(p if q is None else q for q in self.points)

    def accepts(self, p: Point) -> bool:
        a, b, c = self._full(p)
        if tuple(a) == tuple(b) or tuple(c) == tuple(b):
            return False
        return _holds(angle(a, b, c), "=", self.value, self.tolerance, True)

    def prefilter(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        first, vertex, last = self.points
        bx, by = vertex
        if first is None:
            ux, uy = xs - bx, ys - by
            vx, vy = last[0] - bx, last[1] - by
        else:
            ux, uy = first[0] - bx, first[1] - by
            vx, vy = xs - bx, ys - by
        deg = np.degrees(np.arctan2(ux * vy - uy * vx, ux * vx + uy * vy)) % 360.0
        d = np.abs(deg - self.value) % 360.0
        d = np.minimum(d, 360.0 - d)
        return d <= self.tolerance + 1e-6


Constraint = Union[LengthConstraint, AngleConstraint]


def generative_candidates(ctx: SolverContext, constraints: Sequence[Constraint],
                          _lattice_arrays=None) -> list[Point]:
    """Candidates for one free point that satisfy every look-ahead constraint.

    Points come from the lattice of spacing ``ctx.candidates.step`` in
    row-major order. Without constraints this is :func:`candidate_points`.
    """
    if not constraints:
        return candidate_points(ctx)
    if _lattice_arrays is None:
        _lattice_arrays = _lattice_xy(ctx.image, ctx.candidates.step)
    xs, ys = _lattice_arrays
    mask = np.ones(xs.shape, dtype=bool)
    for c in constraints:
        mask &= c.prefilter(xs, ys)
    out = []
    for i in np.flatnonzero(mask):
        p = Point(int(xs[i]), int(ys[i]))
        if all(c.accepts(p) for c in constraints):
            out.append(p)
    return out


def _lattice_xy(img: GrayImage, step: int):
    pts = _lattice(img, step)
    return (np.array([p.x for p in pts], dtype=float), np.array([p.y for p in pts], dtype=float))


# ---------------------------------------------------------------- search


class _BudgetExhausted(Exception):
    pass


class _Item(NamedTuple):
    goal: object
    frame: dict
    depth: int


class _Solution(NamedTuple):
    key: tuple
    bindings: dict
    scalars: dict
    lines: tuple
    score: float


def _rank(sol: _Solution):
    return (-sol.score, sol.key)


def _conflict(a: _Solution, b: _Solution, radius: float) -> bool:
    return all(length(p, q) <= radius for p, q in zip(a.key, b.key))


def line_counts(rules: RuleSet, name: str, arity: int) -> Optional[frozenset]:
    """Possible numbers of ``line`` goals in a derivation of ``name/arity``.

    ``None`` when the predicate can reach a recursive cycle.
    """
    recursive = validate_recursion(rules).recursive
    memo: dict = {}

    def counts(key):
        if key in memo:
            return memo[key]
        if key[0] in recursive:
            memo[key] = None
            return None
        result = set()
        for clause in rules.clauses_for(*key):
            acc = {0}
            for g in clause.body:
                if isinstance(g, Call):
                    if g.name == "line":
                        acc = {a + 1 for a in acc}
                    elif not g.is_builtin:
                        sub = counts((g.name, len(g.args)))
                        if sub is None:
                            memo[key] = None
                            return None
                        acc = {a + b for a in acc for b in sub}
            result |= acc
        memo[key] = frozenset(result)
        return memo[key]

    return counts((name, arity))


class _Search:
    def __init__(self, query: Query, rules: RuleSet, ctx: SolverContext,
                 weights: Optional[tuple], part=(0, 1), line_cache=None):
        self.query = query
        self.rules = rules
        self.ctx = ctx
        self.cfg = ctx.candidates
        self.limits = ctx.limits
        self.part = part
        self.weights = weights
        if weights is not None:
            self.remaining = [sum(weights[j:]) for j in range(len(weights) + 1)]
        self.prune = ctx.limits.prune and weights is not None and len(weights) > 0
        self.grid = candidate_points(ctx)
        self.lattice_xy = _lattice_xy(ctx.image, self.cfg.step)
        self.line_cache = {} if line_cache is None else line_cache
        self.ids = itertools.count()
        self.solutions: list[_Solution] = []
        self.pool: list[_Solution] = []
        self.incumbent = -math.inf
        self.expansions = 0
        self.depth_exceeded = 0
        self.pruned = 0
        self.truncated = False
        self.enum_level = 0
        self.clause_vars = {}
        for c in rules.clauses:
            names = []
            for g in c.body:
                terms = g.args if isinstance(g, Call) else (g.left, g.right)
                for t in terms:
                    if isinstance(t, Var) and t.name not in c.params and t.name not in names:
                        names.append(t.name)
            self.clause_vars[id(c)] = names

    def run(self):
        frame = {}
        for a in self.query.args:
            if a not in frame:
                frame[a] = next(self.ids)
        self.query_ids = [frame[a] for a in self.query.args]
        goal = Call(self.query.name, tuple(Var(a) for a in self.query.args))
        try:
            self._step((_Item(goal, frame, 0), None), {}, (), 0.0)
        except _BudgetExhausted:
            self.truncated = True

    def _tick(self):
        self.expansions += 1
        if self.expansions > self.limits.max_expansions:
            raise _BudgetExhausted

    def _step(self, cont, bindings, lines, partial):
        if cont is None:
            self._complete(bindings, lines, partial)
            return
        item, rest = cont
        g = item.goal
        if isinstance(g, Comparison):
            a = self._scalar(g.left, item.frame, bindings)
            b = self._scalar(g.right, item.frame, bindings)
            if _compare(a, g.op, b, self.cfg):
                self._step(rest, bindings, lines, partial)
            return
        if g.name in BUILTINS:
            self._builtin(item, rest, bindings, lines, partial)
            return
        self._tick()
        depth = item.depth + 1
        if depth > self.limits.max_depth:
            self.depth_exceeded += 1
            return
        for clause in self.rules.clauses_for(g.name, len(g.args)):
            frame = {}
            new_bindings = bindings
            for p, a in zip(clause.params, g.args):
                if isinstance(a, Var):
                    frame[p] = item.frame[a.name]
                else:
                    vid = next(self.ids)
                    frame[p] = vid
                    new_bindings = {**new_bindings, vid: _Scalar(a.value, "num")}
            for v in self.clause_vars[id(clause)]:
                frame[v] = next(self.ids)
            new_cont = rest
            for goal in reversed(clause.body):
                new_cont = (_Item(goal, frame, depth), new_cont)
            self._step(new_cont, new_bindings, lines, partial)

    def _scalar(self, term, frame, bindings) -> _Scalar:
        if isinstance(term, Num):
            return _Scalar(term.value, "num")
        v = bindings.get(frame[term.name])
        if v is None:
            raise InstantiationError(f"variable {term.name!r} is unbound when compared")
        return v

    def _builtin(self, item, rest, bindings, lines, partial):
        g = item.goal
        ids = [item.frame[a.name] for a in g.args]
        for pid in ids[:-1]:
            if pid not in bindings:
                cands = self._candidates(pid, (item, rest), bindings)
                if self.enum_level == 0 and self.part[1] > 1:
                    cands = cands[self.part[0]::self.part[1]]
                self.enum_level += 1
                try:
                    for c in cands:
                        self._tick()
                        self._builtin(item, rest, {**bindings, pid: c}, lines, partial)
                finally:
                    self.enum_level -= 1
                return
        pts = [bindings[i] for i in ids[:-1]]
        name = g.name
        if name == "line":
            if length(pts[0], pts[1]) < MIN_SEGMENT_LENGTH:
                return
            value = self._line(pts[0], pts[1])
        elif name == "angle":
            if pts[0] == pts[1] or pts[2] == pts[1]:
                return
            value = angle(*pts)
        else:
            value = length(pts[0], pts[1])
        out = ids[-1]
        result = _Scalar(value, name)
        if out in bindings:
            if not _compare(bindings[out], "=", result, self.cfg):
                return
        else:
            bindings = {**bindings, out: result}
        if name == "line":
            j = len(lines)
            lines = lines + (Segment(pts[0], pts[1], value),)
            if self.weights is not None and j < len(self.weights):
                partial += self.weights[j] * value
                if self.prune and bound_and_prune(partial, self.weights[j + 1:], self.incumbent) == PRUNE:
                    self.pruned += 1
                    return
        self._step(rest, bindings, lines, partial)

    def _line(self, p1, p2) -> float:
        key = (p1, p2) if p1 <= p2 else (p2, p1)
        v = self.line_cache.get(key)
        if v is None:
            v = line(self.ctx.image, key[0], key[1], self.ctx.params)
            self.line_cache[key] = v
        return v

    def _candidates(self, pid, cont, bindings) -> list:
        if not self.cfg.generative:
            return self.grid
        constraints = self._lookahead(pid, cont, bindings)
        if not constraints:
            return self.grid
        return generative_candidates(self.ctx, constraints, self.lattice_xy)

    def _lookahead(self, pid, cont, bindings) -> list:
        calls = []
        tests = {}
        node = cont
        while node is not None:
            item, node = node
            g = item.goal
            if isinstance(g, Call):
                if g.name in ("len", "angle"):
                    calls.append((g.name, [item.frame[a.name] for a in g.args]))
                continue
            if not isinstance(g, Comparison):
                continue
            for var, op, other in ((g.left, g.op, g.right), (g.right, _FLIP[g.op], g.left)):
                if not isinstance(var, Var):
                    continue
                if isinstance(other, Num):
                    target = _Scalar(other.value, "num")
                else:
                    target = bindings.get(item.frame[other.name])
                    if target is None:
                        continue
                tests.setdefault(item.frame[var.name], []).append((op, target))
        out = []
        for name, ids in calls:
            res = ids[-1]
            if res in bindings or res not in tests:
                continue
            pts = ids[:-1]
            if pts.count(pid) != 1:
                continue
            others = [bindings.get(i) for i in pts if i != pid]
            if any(o is None for o in others):
                continue
            for op, target in tests[res]:
                tol = _tolerance((name, target.kind), self.cfg)
                if name == "len":
                    if op in ("<", "<="):
                        out.append(LengthConstraint(others[0], op, target.value, self.cfg.length_tolerance))
                    elif op == "=" and target.kind != "angle":
                        out.append(LengthConstraint(others[0], op, target.value, tol))
                elif op == "=" and pts.index(pid) != 1:
                    slots = tuple(None if i == pid else bindings[i] for i in pts)
                    out.append(AngleConstraint(slots, target.value, tol))
        return out

    def _complete(self, bindings, lines, partial):
        pts = {}
        scalars = {}
        for name, vid in zip(self.query.args, self.query_ids):
            v = bindings.get(vid)
            if v is None:
                raise InstantiationError(f"query variable {name!r} left unbound")
            if isinstance(v, _Scalar):
                scalars[name] = v.value
            else:
                pts[name] = v
        if self.weights is not None:
            total = partial
        else:
            ws = self.ctx.weights.for_rule(self.query.name, len(lines))
            total = score([s.strength for s in lines], ws)
        sol = _Solution(tuple(pts.values()), pts, scalars, lines, total)
        self.solutions.append(sol)
        if self.prune:
            self._offer(sol)

    def _offer(self, sol: _Solution):
        r = self.limits.nms_radius
        keep = []
        for other in self.pool:
            if _conflict(sol, other, r):
                if _rank(other) <= _rank(sol):
                    return
            else:
                keep.append(other)
        keep.append(sol)
        keep.sort(key=_rank)
        self.pool = keep[:self.limits.top_k]
        if len(self.pool) >= self.limits.top_k:
            self.incumbent = self.pool[-1].score


def non_max_suppression(solutions, radius: float, top_k: int) -> list:
    """Greedy suppression in rank order: higher score first, then smaller
    point tuple. A solution is dropped when every point lies within
    ``radius`` of the corresponding point of an already kept one."""
    kept = []
    for s in sorted(solutions, key=_rank):
        if any(_conflict(s, k, radius) for k in kept):
            continue
        kept.append(s)
        if len(kept) >= top_k:
            break
    return kept


def solve(query: Union[Query, str], rules: RuleSet, ctx: SolverContext, threads: int = 1) -> Detections:
    """Find the best-scoring bindings of ``query`` on ``ctx.image``.

    Returns detections sorted by descending score after non-max suppression,
    at most ``ctx.limits.top_k`` of them. ``threads > 1`` splits the first
    enumerated variable's candidates across worker threads.

    Raises:
        UnknownPredicateError: the query names no defined predicate.
        ValueError: configured weights do not fit the query rule.
    """
    if isinstance(query, str):
        query = parse_query(query)
    if not rules.clauses_for(query.name, len(query.args)):
        arities = sorted(a for n, a in rules.predicates() if n == query.name)
        hint = f" (defined with arity {', '.join(map(str, arities))})" if arities else ""
        raise UnknownPredicateError(f"unknown predicate {query.name}/{len(query.args)}{hint}")

    counts = line_counts(rules, query.name, len(query.args))
    weights = None
    if counts is not None and len(counts) == 1:
        weights = ctx.weights.for_rule(query.name, next(iter(counts)))
    elif query.name in ctx.weights.per_rule:
        raise ValueError(f"rule {query.name!r} has a variable number of line goals; "
                         "per-rule weights cannot be applied")

    if threads <= 1:
        searches = [_Search(query, rules, ctx, weights)]
        searches[0].run()
    else:
        searches = [_Search(query, rules, ctx, weights, part=(i, threads)) for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: s.run(), searches))

    raw = [s for search in searches for s in search.solutions]
    kept = non_max_suppression(raw, ctx.limits.nms_radius, ctx.limits.top_k)
    result = Detections(
        (Detection(s.bindings, s.lines, s.score, s.scalars) for s in kept),
        truncated=any(s.truncated for s in searches),
        depth_exceeded=sum(s.depth_exceeded for s in searches),
        expansions=sum(s.expansions for s in searches),
        pruned=sum(s.pruned for s in searches),
    )
    log.debug("solve %s: %d raw solutions, %d kept, %d expansions, %d pruned",
              query, len(raw), len(result), result.expansions, result.pruned)
    return result
