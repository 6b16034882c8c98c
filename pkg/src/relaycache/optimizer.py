"""Cache placement optimization over the budget-constrained box.

The feasible set is ``D = { q : q_l in [0,1], sum_l F_l q_l <= budget }``:
a box cut by a single knapsack row.  Its vertices are the 0/1 points that
respect the budget plus, on the budget facet, points with exactly one
fractional coordinate.  The sample-average objective is convex in q, so
its maximum sits on a vertex; the walk below is a steepest-ascent over
adjacent vertices and the brute-force enumerator is the exact oracle for
desk-scale instances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytics import _pack_smallest_fill, coop_probability, per_urp_coop_separate
from .model import CacheVector, DimensionGuardError, DomainError, \
    NetworkConfig, partition_users

_TOL = 1e-9  # facet tightness / duplicate detection, budgets are O(1)-O(100)

ENUMERATION_LIMIT = 20


@dataclass(frozen=True)
class Polyhedron:
    """The placement feasible set: unit box plus one knapsack row."""

    file_sizes: np.ndarray
    budget: float

    def __post_init__(self):
        sizes = np.asarray(self.file_sizes, dtype=float).copy()
        if sizes.ndim != 1 or sizes.size == 0 or np.any(sizes <= 0):
            raise DomainError("file sizes must be a non-empty positive vector")
        if self.budget < 0:
            raise DomainError("budget must be non-negative")
        sizes.flags.writeable = False
        object.__setattr__(self, "file_sizes", sizes)
        object.__setattr__(self, "budget", float(self.budget))

    @classmethod
    def from_config(cls, config: NetworkConfig) -> "Polyhedron":
        return cls(file_sizes=np.array(config.file_sizes), budget=config.cache_budget)

    @property
    def dim(self) -> int:
        return self.file_sizes.size

    def contains(self, q, tol: float = _TOL) -> bool:
        arr = np.asarray(q, dtype=float)
        if arr.shape != (self.dim,):
            return False
        if np.any(arr < -tol) or np.any(arr > 1 + tol):
            return False
        return float(self.file_sizes @ arr) <= self.budget + tol


@dataclass(frozen=True)
class Vertex:
    """An extreme point: coordinates at 1, at most one fractional one.

    ``ones`` holds 0-based positions into the placement vector; ``frac``
    is an optional ``(position, value)`` pair which exists only when the
    budget row is tight.
    """

    ones: tuple
    frac: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "ones", tuple(sorted(int(i) for i in self.ones)))
        if self.frac is not None:
            pos, val = self.frac
            object.__setattr__(self, "frac", (int(pos), float(val)))

    def to_array(self, dim: int) -> np.ndarray:
        q = np.zeros(dim)
        q[list(self.ones)] = 1.0
        if self.frac is not None:
            q[self.frac[0]] = self.frac[1]
        return q

    def weight(self, poly: Polyhedron) -> float:
        w = float(poly.file_sizes[list(self.ones)].sum()) if self.ones else 0.0
        if self.frac is not None:
            w += poly.file_sizes[self.frac[0]] * self.frac[1]
        return w

    def validate(self, poly: Polyhedron, tol: float = _TOL) -> None:
        if self.frac is not None:
            pos, val = self.frac
            if pos in self.ones:
                raise DomainError("fractional coordinate collides with a one")
            if not tol < val < 1 - tol:
                raise DomainError("fractional value must lie strictly in (0, 1)")
            if abs(self.weight(poly) - poly.budget) > tol:
                raise DomainError("a fractional coordinate requires a tight budget")
        elif self.weight(poly) > poly.budget + tol:
            raise DomainError("vertex exceeds the budget")

    def key(self, dim: int) -> tuple:
        """Rounded coordinates; used for dedup and lexicographic ties."""
        return tuple(round(x, 9) for x in self.to_array(dim))


@dataclass(frozen=True)
class ObjectiveEstimate:
    """Sample-average cooperative probability and its sample count."""

    value: float
    n_samples: int


class SaaEvaluator:
    """Caches per-sample request structure for fast objective evaluation.

    For a 0/1 placement the packed minimum has a closed form, so binary
    points (the bulk of what enumeration and the walk visit) go through a
    vectorized path; everything else falls back to the exact per-sample
    pipeline.  Both paths agree to machine precision.
    """

    def __init__(self, samples, config: NetworkConfig):
        if not samples:
            raise DomainError("need at least one request-profile sample")
        self.config = config
        self.n_samples = len(samples)
        bins = 3 * config.M
        self._bins = bins
        self._samples = list(samples)
        n, L = self.n_samples, config.L
        self._counts1 = np.zeros((n, L))
        self._counts2 = np.zeros((n, L))
        self._k1 = np.zeros(n)
        self._k2 = np.zeros(n)
        self._files1 = []
        self._files2 = []
        for s, pi in enumerate(samples):
            part = partition_users(pi, config.ownership)
            f1 = [pi.pi[u - 1] - 1 for u in part.k1]
            f2 = [pi.pi[u - 1] - 1 for u in part.k2]
            self._files1.append(np.array(f1, dtype=int))
            self._files2.append(np.array(f2, dtype=int))
            self._k1[s] = len(f1)
            self._k2[s] = len(f2)
            np.add.at(self._counts1[s], f1, 1.0)
            np.add.at(self._counts2[s], f2, 1.0)

    def _binary_masses(self, qcols: np.ndarray):
        """Masses for 0/1 placements: packing j ones into b bins leaves
        a minimum slot of floor(j / b)."""
        b = self._bins
        j1 = self._counts1 @ qcols
        j2 = self._counts2 @ qcols
        k1 = self._k1[:, None]
        k2 = self._k2[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            m1 = np.where(k1 >= b, np.floor(j1 / b) * (b / np.maximum(k1, 1)), 0.0)
            m2 = np.where(k2 >= b, np.floor(j2 / b) * (b / np.maximum(k2, 1)), 0.0)
        return m1, m2, k1, k2

    def evaluate_binary_many(self, qcols: np.ndarray) -> np.ndarray:
        """Objective for a batch of 0/1 placements stacked as columns."""
        m1, m2, k1, k2 = self._binary_masses(qcols)
        i1 = (k1 < self.config.M)
        i2 = (k2 < self.config.M)
        num = m1 + m2 - 2 * m1 * m2
        f1 = 3 - 3 * i1 - (5 - 3 * i2) * m1
        f2 = 3 - 3 * i2 - (5 - 3 * i1) * m2
        den = f1 + f2 + 4 * m1 * m2
        saturated = (num < 1e-12) & (den < 1e-12)
        p = np.where(saturated, 1.0, num / np.where(den <= 0, 1.0, den))
        p = np.where(i1 & i2, 0.0, np.clip(p, 0.0, 1.0))
        return p.mean(axis=0)

    def _general_value(self, q: np.ndarray) -> float:
        total = 0.0
        b = self._bins
        M = self.config.M
        for s in range(self.n_samples):
            ms = []
            for files, k in ((self._files1[s], self._k1[s]),
                             (self._files2[s], self._k2[s])):
                k = int(k)
                if k == 0:
                    ms.append((0.0, 1))
                    continue
                packed = _pack_smallest_fill(q[files], b)
                m = (b / k) * min(packed)
                ms.append((min(1.0, m), 1 if k < M else 0))
            (m1, i1), (m2, i2) = ms
            total += coop_probability(m1, m2, i1, i2)
        return total / self.n_samples

    def value(self, q: np.ndarray) -> float:
        q = np.asarray(q, dtype=float)
        if np.all((q == 0.0) | (q == 1.0)):
            return float(self.evaluate_binary_many(q[:, None])[0])
        return self._general_value(q)


def saa_objective(q: CacheVector, samples, config: NetworkConfig) -> ObjectiveEstimate:
    """Sample-average cooperative probability of placement ``q``."""
    if not q.feasible_for(config):
        raise DomainError("placement is infeasible for the scenario budget")
    ev = SaaEvaluator(samples, config)
    return ObjectiveEstimate(value=ev.value(q.q), n_samples=len(samples))


def enumerate_vertices(poly: Polyhedron) -> list:
    """All extreme points of the feasible set.

    Exponential in the dimension; refuses instances beyond
    ``ENUMERATION_LIMIT`` coordinates.
    """
    L = poly.dim
    if L > ENUMERATION_LIMIT:
        raise DimensionGuardError(
            f"vertex enumeration supports at most {ENUMERATION_LIMIT} files "
            f"(got {L}); use the vertex walk for larger catalogs")
    sizes = poly.file_sizes
    budget = poly.budget
    seen = {}

    def emit(v: Vertex):
        seen.setdefault(v.key(L), v)

    def grow(start: int, ones: tuple, weight: float):
        emit(Vertex(ones=ones))
        for j in range(L):
            if j in ones:
                continue
            theta = (budget - weight) / sizes[j]
            if _TOL < theta < 1 - _TOL:
                emit(Vertex(ones=ones, frac=(j, theta)))
        for j in range(start, L):
            w = weight + sizes[j]
            if w <= budget + _TOL:
                grow(j + 1, ones + (j,), w)

    grow(0, (), 0.0)
    out = sorted(seen.values(), key=lambda v: v.key(L))
    for v in out:
        v.validate(poly)
    return out


def neighbors(v: Vertex, poly: Polyhedron) -> list:
    """Vertices sharing an edge with ``v``.

    Derived from the pivot structure of the box-plus-knapsack geometry:
    single-coordinate moves, moves onto or off the budget facet, and (on
    the facet) slides that trade mass between two coordinates while the
    budget stays tight.
    """
    v.validate(poly)
    sizes = poly.file_sizes
    budget = poly.budget
    L = poly.dim
    ones = set(v.ones)
    cand = []

    if v.frac is None:
        slack = budget - v.weight(poly)
        zeros = [j for j in range(L) if j not in ones]
        for l in ones:  # a coordinate at 1 can always retire to 0
            cand.append(Vertex(ones=tuple(ones - {l})))
        for l in zeros:
            if sizes[l] <= slack + _TOL:
                cand.append(Vertex(ones=tuple(ones | {l})))
            elif slack > _TOL:
                cand.append(Vertex(ones=v.ones, frac=(l, slack / sizes[l])))
        if slack <= _TOL:
            # degenerate vertex on the facet: tight slides exchanging one
            # raising and one falling coordinate are edges too
            for a in zeros:
                for b in ones:
                    fa, fb = sizes[a], sizes[b]
                    rest = tuple(ones - {b})
                    if abs(fa - fb) <= _TOL * max(fa, fb):
                        cand.append(Vertex(ones=rest + (a,)))
                    elif fa < fb:
                        cand.append(Vertex(ones=rest + (a,), frac=(b, 1 - fa / fb)))
                    else:
                        cand.append(Vertex(ones=rest, frac=(a, fb / fa)))
    else:
        j, theta = v.frac
        fj = sizes[j]
        zeros = [l for l in range(L) if l not in ones and l != j]
        # leave the facet: the fractional coordinate drains to 0
        cand.append(Vertex(ones=v.ones))
        for l in ones:
            # slide along the facet: q_l falls from 1, q_j rises
            fl = sizes[l]
            room_j = (1 - theta) * fj
            rest = tuple(ones - {l})
            if abs(room_j - fl) <= _TOL:
                cand.append(Vertex(ones=rest + (j,)))
            elif room_j < fl:
                cand.append(Vertex(ones=rest + (j,), frac=(l, 1 - room_j / fl)))
            else:
                cand.append(Vertex(ones=rest, frac=(j, theta + fl / fj)))
        for l in zeros:
            # slide along the facet: q_l rises from 0, q_j falls
            fl = sizes[l]
            room_j = theta * fj
            if abs(room_j - fl) <= _TOL:
                cand.append(Vertex(ones=tuple(ones | {l})))
            elif fl < room_j:
                cand.append(Vertex(ones=tuple(ones | {l}), frac=(j, theta - fl / fj)))
            else:
                cand.append(Vertex(ones=v.ones, frac=(l, room_j / fl)))

    out = {}
    self_key = v.key(L)
    for u in cand:
        key = u.key(L)
        if key == self_key or key in out:
            continue
        u.validate(poly)
        out[key] = u
    return sorted(out.values(), key=lambda u: u.key(L))


def _ascend(poly: Polyhedron, value_of, start: Vertex):
    """Steepest ascent over adjacent vertices; ties go to the
    lexicographically smallest point.  Returns (vertex, value, steps)."""
    current = start
    cur_val = value_of(current)
    steps = 0
    while True:
        best = None
        best_val = cur_val
        for u in neighbors(current, poly):
            val = value_of(u)
            if val > best_val or (best is not None and val == best_val
                                  and u.key(poly.dim) < best.key(poly.dim)):
                best, best_val = u, val
        if best is None:
            return current, cur_val, steps
        current, cur_val = best, best_val
        steps += 1


def vertex_walk(samples, poly: Polyhedron, config: NetworkConfig):
    """Steepest-ascent placement search from the empty cache.

    Returns ``(placement, estimate, steps)``; the placement is a vertex
    that no neighbor improves upon.
    """
    ev = SaaEvaluator(samples, config)
    L = poly.dim

    def value_of(u: Vertex) -> float:
        return ev.value(u.to_array(L))

    best, val, steps = _ascend(poly, value_of, Vertex(ones=()))
    return (CacheVector(best.to_array(L)),
            ObjectiveEstimate(value=val, n_samples=len(samples)),
            steps)


def global_opt_bruteforce(samples, poly: Polyhedron, config: NetworkConfig):
    """Exact optimum by scoring every vertex (desk-scale instances only)."""
    verts = enumerate_vertices(poly)
    ev = SaaEvaluator(samples, config)
    L = poly.dim

    binary = [v for v in verts if v.frac is None]
    frac = [v for v in verts if v.frac is not None]
    best_v, best_val = None, -1.0
    if binary:
        cols = np.column_stack([v.to_array(L) for v in binary])
        vals = ev.evaluate_binary_many(cols)
        for v, val in zip(binary, vals):
            if val > best_val or (val == best_val and v.key(L) < best_v.key(L)):
                best_v, best_val = v, float(val)
    for v in frac:
        val = ev.value(v.to_array(L))
        if val > best_val or (val == best_val and v.key(L) < best_v.key(L)):
            best_v, best_val = v, val
    return (CacheVector(best_v.to_array(L)),
            ObjectiveEstimate(value=best_val, n_samples=len(samples)))


def uniform_placement(config: NetworkConfig) -> CacheVector:
    """Spread the budget evenly: q_l = budget / total catalog size."""
    value = min(1.0, config.cache_budget / config.total_size)
    return CacheVector(np.full(config.L, value))


def infinite_placement(config: NetworkConfig) -> CacheVector:
    """Unbounded-cache baseline: everything cached, budget waived."""
    return CacheVector(np.ones(config.L), budget_exempt=True)


def separate_rs_placement(samples, config: NetworkConfig):
    """Placement for the separate-relays baseline: each BS's relay gets
    half the budget and is filled by a vertex walk over that BS's own
    files, scoring the joint separate-relay objective (the other block
    held fixed, BS1 first).

    Returns ``(placement, estimate, steps)`` like :func:`vertex_walk`.
    """
    if not samples:
        raise DomainError("need at least one request-profile sample")
    half = config.cache_budget / 2.0
    q_full = np.zeros(config.L)
    total_steps = 0

    def objective(q_arr: np.ndarray) -> float:
        cv = CacheVector(q_arr, budget_exempt=True)  # budget enforced per relay
        return float(np.mean([per_urp_coop_separate(config, cv, pi)
                              for pi in samples]))

    for gw in (1, 2):
        positions = [l - 1 for l in config.owned_files(gw)]
        if not positions:
            continue
        sub_sizes = np.array([config.file_sizes[p] for p in positions])
        sub_poly = Polyhedron(file_sizes=sub_sizes, budget=half)

        def value_of(u: Vertex) -> float:
            trial = q_full.copy()
            trial[positions] = u.to_array(len(positions))
            return objective(trial)

        best, _, steps = _ascend(sub_poly, value_of, Vertex(ones=()))
        q_full[positions] = best.to_array(len(positions))
        total_steps += steps

    value = objective(q_full)
    return (CacheVector(q_full),
            ObjectiveEstimate(value=value, n_samples=len(samples)),
            total_steps)
