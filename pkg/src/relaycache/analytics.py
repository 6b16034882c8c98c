"""Closed-form engine for the cached relay network.

Everything here is exact arithmetic on one request profile: the greedy
packing of cached mass into cooperative stream slots, the resulting
cooperative-transmission probability (both the priority fixed points and
their fair average), the sum DoF, and the curvature blocks used to check
convexity of the placement objective.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CacheVector, DomainError, NetworkConfig, Urp, \
    gather_placement, partition_users

_EPS = 1e-12


@dataclass(frozen=True)
class ModifiedPlacement:
    """Cached mass packed into cooperative stream slots (one per stream)."""

    qtilde: tuple

    def __len__(self) -> int:
        return len(self.qtilde)

    @property
    def minimum(self) -> float:
        return min(self.qtilde)


@dataclass(frozen=True)
class CoopStats:
    """Cooperation statistics of a single request profile."""

    m1: float
    m2: float
    i1: int
    i2: int
    f1: float
    f2: float
    p_coop: float


@dataclass(frozen=True)
class PriorityProbs:
    """Per-BS cooperative-slot fractions when one BS holds static priority."""

    p1: float
    p2: float
    p_total: float


@dataclass(frozen=True)
class HessianBlock:
    """2x2 curvature block of the cooperative probability in (m1, m2)."""

    d11: float
    d12: float
    d22: float
    det: float


def _pack_smallest_fill(values, n_bins: int) -> list:
    """Greedy packing: seed the bins with the largest entries, then pour
    each remaining entry (largest first) onto the currently smallest bin.

    Ties (equal values during seeding, equal bins during pouring) break
    toward the lowest index so the result is deterministic.  When there
    are fewer entries than bins the entries are kept in input order and
    zero-padded instead.
    """
    vals = [float(v) for v in values]
    if len(vals) < n_bins:
        return vals + [0.0] * (n_bins - len(vals))
    order = sorted(range(len(vals)), key=lambda i: (-vals[i], i))
    bins = [vals[i] for i in order[:n_bins]]
    for i in order[n_bins:]:
        v = vals[i]
        if v == 0.0:
            continue
        m = 0
        small = bins[0]
        for j in range(1, n_bins):
            if bins[j] < small:
                small = bins[j]
                m = j
        bins[m] = small + v
    return bins


def modify_placement(q_i, m_antennas: int, n_bins: int = None) -> ModifiedPlacement:
    """Pack one BS's gathered placement fractions into stream slots.

    ``n_bins`` defaults to ``3 * m_antennas``, the number of streams a
    BS-relay cooperative slot carries.  The packing only moves mass
    around: the slot sums always total ``sum(q_i)``.
    """
    if m_antennas < 1:
        raise DomainError("antenna count must be positive")
    bins = 3 * m_antennas if n_bins is None else int(n_bins)
    if bins < 1:
        raise DomainError("bin count must be positive")
    vals = np.asarray(list(q_i), dtype=float)
    if vals.size and (vals.min() < -_EPS or vals.max() > 1 + _EPS):
        raise DomainError("placement entries must lie in [0, 1]")
    return ModifiedPlacement(qtilde=tuple(_pack_smallest_fill(vals, bins)))


def coop_mass(qt: ModifiedPlacement, k_size: int) -> float:
    """Normalized cached-delivery budget limiting one BS's cooperation.

    Returns ``(bins / |K_i|) * min(qtilde)`` where ``bins`` is the number
    of cooperative streams (the packing length), and 0 for an empty user
    set.  The value cannot legitimately exceed 1; an excess beyond 1e-9
    indicates corrupt inputs and raises.
    """
    if k_size < 0:
        raise DomainError("user-set size cannot be negative")
    if k_size == 0:
        return 0.0
    m = (len(qt) / k_size) * qt.minimum
    if m > 1 + 1e-9:
        raise DomainError(f"cooperation mass {m} exceeds 1; inconsistent packing")
    return min(1.0, max(0.0, m))


def coop_probability(m1: float, m2: float, i1: int, i2: int) -> float:
    """Long-run fraction of slots spent in BS-relay cooperative mode.

    ``m1, m2`` are the two BSs' cooperation masses and ``i1, i2`` indicate
    a BS too small to transmit alone (fewer users than antennas); such a
    BS must carry zero mass.  The 0/0 point at ``m1 = m2 = 1`` is the
    always-cooperating limit and resolves to 1.
    """
    for m, i in ((m1, i1), (m2, i2)):
        if not 0 <= m <= 1:
            raise DomainError(f"cooperation mass {m} outside [0, 1]")
        if i not in (0, 1):
            raise DomainError("indicators must be 0 or 1")
        if i == 1 and m > _EPS:
            raise DomainError("a BS with fewer users than antennas cannot "
                              "carry cooperation mass")
    if i1 and i2:
        return 0.0
    num = m1 + m2 - 2 * m1 * m2
    f1 = 3 - 3 * i1 - (5 - 3 * i2) * m1
    f2 = 3 - 3 * i2 - (5 - 3 * i1) * m2
    den = f1 + f2 + 4 * m1 * m2
    if num < _EPS and den < _EPS:
        # both masses at 1: the cooperative phases tile every slot
        return 1.0
    if den <= 0:
        raise DomainError("degenerate denominator for in-range masses")
    return min(1.0, max(0.0, num / den))


def priority_probability(m1: float, m2: float, i1: int, i2: int,
                         priority: int, coop_streams_per_antenna: int = 3
                         ) -> PriorityProbs:
    """Cooperative-slot fractions when one BS statically wins coop ties.

    Solves the steady-state balance of the slotted protocol under the
    assumption that BS ``priority`` takes every slot in which it could
    cooperate.  ``coop_streams_per_antenna`` is 3 for the shared-relay
    system (3M streams per cooperative slot) and 2 for the separate-relay
    baseline (2M streams).
    """
    if priority not in (1, 2):
        raise DomainError("priority must be 1 or 2")
    s = int(coop_streams_per_antenna)
    if s < 1:
        raise DomainError("stream ratio must be positive")
    for m, i in ((m1, i1), (m2, i2)):
        if not 0 <= m <= 1:
            raise DomainError(f"cooperation mass {m} outside [0, 1]")
        if i not in (0, 1):
            raise DomainError("indicators must be 0 or 1")
        if i == 1 and m > _EPS:
            raise DomainError("a BS with fewer users than antennas cannot "
                              "carry cooperation mass")
    if priority == 2:
        sym = priority_probability(m2, m1, i2, i1, 1, s)
        return PriorityProbs(p1=sym.p2, p2=sym.p1, p_total=sym.p_total)

    # BS1 first: the non-priority BS settles to a fixed point on its own,
    # then BS1's fraction follows from the shared-channel balance.
    c1 = s * (2 - i1)
    c2 = s * (2 - i2)
    p2 = m2 / (c1 - (c1 - 1) * m2)
    num1 = m1 * (1 - p2)
    den1 = c2 - (c2 - 1 + p2) * m1
    if abs(den1) < _EPS and abs(num1) < _EPS:
        p1 = 0.5  # limit of the fixed point as both masses reach 1
    else:
        p1 = num1 / den1
    p1 = min(1.0, max(0.0, p1))
    p2 = min(1.0, max(0.0, p2))
    return PriorityProbs(p1=p1, p2=p2, p_total=p1 + p2 - p1 * p2)


def separate_coop_probability(m1: float, m2: float, i1: int, i2: int) -> float:
    """Cooperative-slot fraction for the two-separate-relays baseline.

    Same balance equations with 2M streams per cooperative slot, averaged
    over the two static priority assignments for fairness.
    """
    a = priority_probability(m1, m2, i1, i2, 1, coop_streams_per_antenna=2)
    b = priority_probability(m1, m2, i1, i2, 2, coop_streams_per_antenna=2)
    return 0.5 * (a.p_total + b.p_total)


def dof(mean_coop: float, m_antennas: int) -> float:
    """Sum DoF from the average cooperative fraction: M (1 + 2 E[p])."""
    if not 0 <= mean_coop <= 1:
        raise DomainError("mean cooperative probability must lie in [0, 1]")
    return m_antennas * (1 + 2 * mean_coop)


def _masses_for(config: NetworkConfig, q: CacheVector, pi: Urp,
                streams_per_antenna: int):
    """Partition, gather and pack one profile; returns (m1, m2, i1, i2)."""
    part = partition_users(pi, config.ownership)
    bins = streams_per_antenna * config.M
    out = []
    for gw in (1, 2):
        k = part.size(gw)
        i = 1 if k < config.M else 0
        if k == 0:
            # a gateway nobody requested never transmits at all
            out.append((0.0, 1))
            continue
        gathered = gather_placement(pi, q, part, gw)
        qt = modify_placement(gathered, config.M, n_bins=bins)
        out.append((coop_mass(qt, k), i))
    (m1, i1), (m2, i2) = out
    return m1, m2, i1, i2


def per_urp_coop(config: NetworkConfig, q: CacheVector, pi: Urp) -> CoopStats:
    """Full cooperation statistics of one request profile under placement q."""
    if len(pi) != config.K:
        raise DomainError(f"profile has {len(pi)} users, config expects {config.K}")
    m1, m2, i1, i2 = _masses_for(config, q, pi, streams_per_antenna=3)
    f1 = 3 - 3 * i1 - (5 - 3 * i2) * m1
    f2 = 3 - 3 * i2 - (5 - 3 * i1) * m2
    return CoopStats(m1=m1, m2=m2, i1=i1, i2=i2, f1=f1, f2=f2,
                     p_coop=coop_probability(m1, m2, i1, i2))


def per_urp_coop_separate(config: NetworkConfig, q: CacheVector, pi: Urp) -> float:
    """Cooperative fraction of one profile in the separate-relays baseline.

    Each BS owns an M-antenna relay, so a cooperative slot carries 2M
    streams and needs 2M eligible users; the packing therefore uses 2M
    slots per BS.
    """
    if len(pi) != config.K:
        raise DomainError(f"profile has {len(pi)} users, config expects {config.K}")
    m1, m2, i1, i2 = _masses_for(config, q, pi, streams_per_antenna=2)
    return separate_coop_probability(m1, m2, i1, i2)


def hessian_block(m1: float, m2: float, weight: float = 1.0) -> HessianBlock:
    """Second derivatives of the cooperative probability in (m1, m2).

    Valid on the interior where both indicators are 0 and the shared
    denominator ``6 + 4 m1 m2 - 5 m1 - 5 m2`` is positive; the block is
    positive semidefinite there, which is what makes vertex search on the
    placement polytope exact.  ``weight`` scales the underlying function
    (a profile probability in the expectation), so the determinant picks
    up ``weight**2``.
    """
    for m in (m1, m2):
        if not 0 <= m < 1:
            raise DomainError("masses must lie in [0, 1) for curvature blocks")
    den = 6 + 4 * m1 * m2 - 5 * m1 - 5 * m2
    if den <= 0:
        raise DomainError("curvature undefined: denominator not positive")
    den3 = den ** 3
    d11 = 12 * weight * (5 - 4 * m2) * (1 - m2) ** 2 / den3
    d22 = 12 * weight * (5 - 4 * m1) * (1 - m1) ** 2 / den3
    # cross term is negative: raising one BS's mass lowers the marginal
    # value of the other's (they compete for the shared channel)
    d12 = -12 * weight * (1 - m1) * (1 - m2) / den3
    det = 576 * weight ** 2 * (1 - m1) ** 2 * (1 - m2) ** 2 / den ** 5
    return HessianBlock(d11=d11, d12=d12, d22=d22, det=det)
