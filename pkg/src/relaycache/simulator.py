"""Slot-level execution of the cache-assisted relaying protocol.

Each user works through an endless sequence of unit-size segments of its
requested file.  Per segment, up to ``q`` of the unit can arrive as
relay-cached parity (cooperative slots) and the rest as base-station
parity (BS-only slots); any mix totalling one unit decodes the segment.
A slot serves exactly one BS: cooperatively with the relay when that BS
has enough cache-eligible users, alone otherwise.

``delta`` is the per-scheduled-user delivery per slot in segment units;
the closed-form fractions are exact in the limit delta -> 0 with
slots * delta -> infinity.
"""
from __future__ import annotations

import csv
import random
from dataclasses import dataclass

from .model import CacheVector, ConfigurationError, DomainError, \
    NetworkConfig, Urp, partition_users

_EPS = 1e-12

POLICY_MODES = ("fair-coin", "priority-1", "priority-2")


@dataclass(frozen=True)
class SlotPolicy:
    """How cooperative ties are broken, and how fast bits drain.

    ``fair-coin`` follows the protocol as specified (a fair coin whenever
    both BSs qualify); the priority modes statically favour one BS in
    cooperative mode and exist to compare against the per-priority
    fixed-point fractions.
    """

    mode: str = "fair-coin"
    delta: float = 1.0 / 512

    def __post_init__(self):
        if self.mode not in POLICY_MODES:
            raise ConfigurationError(f"unknown policy mode {self.mode!r}")
        if not 0 < self.delta <= 1:
            raise ConfigurationError("delta must lie in (0, 1]")


@dataclass(frozen=True)
class SimResult:
    """Aggregated slot counts and throughput of one simulation run."""

    slots_total: int
    coop_slots: tuple          # (served by BS1, served by BS2)
    bsonly_slots: tuple        # (served by BS1, served by BS2)
    idle_slots: int
    empirical_coop: float
    per_user_throughput: tuple  # completed segments per slot, per user
    dof_count: float

    @property
    def coop_total(self) -> int:
        return sum(self.coop_slots)

    @property
    def bsonly_total(self) -> int:
        return sum(self.bsonly_slots)


class SimState:
    """Mutable per-user progress plus the fixed request structure."""

    __slots__ = ("config", "pi", "qf", "k1", "k2", "c", "n", "completed", "slot")

    def __init__(self, config, pi, qf, k1, k2):
        self.config = config
        self.pi = pi
        self.qf = qf              # cached fraction available per user's file
        self.k1 = k1              # 0-based users of BS1
        self.k2 = k2              # 0-based users of BS2
        self.c = [0.0] * config.K     # cached bits delivered, current segment
        self.n = [0.0] * config.K     # non-cached bits delivered
        self.completed = [0] * config.K
        self.slot = 0

    def parity_state(self, k: int) -> int:
        """1 while user k still has undelivered cached parity available."""
        return 1 if (self.c[k] < self.qf[k] - _EPS
                     and self.c[k] + self.n[k] < 1 - _EPS) else 0

    def eligible(self, gateway: int) -> list:
        users = self.k1 if gateway == 1 else self.k2
        c, n, qf = self.c, self.n, self.qf
        return [k for k in users
                if c[k] < qf[k] - _EPS and c[k] + n[k] < 1 - _EPS]


def init_state(config: NetworkConfig, q: CacheVector, pi: Urp) -> SimState:
    """Fresh state: every user at the start of a new segment."""
    if len(pi) != config.K:
        raise DomainError(f"profile has {len(pi)} users, config expects {config.K}")
    if not q.feasible_for(config):
        raise DomainError("placement is infeasible for the scenario budget")
    part = partition_users(pi, config.ownership)
    qf = [float(q.q[f - 1]) for f in pi.pi]
    k1 = [u - 1 for u in part.k1]
    k2 = [u - 1 for u in part.k2]
    return SimState(config, pi, qf, k1, k2)


def step(state: SimState, policy: SlotPolicy, rng: random.Random,
         coop_threshold: int = None, coop_streams: int = None):
    """Advance one slot in place.

    Returns ``(mode, serving_bs, users, delivered_bits)`` where mode is
    ``"coop"``, ``"bsonly"`` or ``"idle"`` and users are 0-based.  The
    threshold/stream overrides exist for the separate-relay baseline
    (2M instead of 3M); the shared-relay protocol uses the defaults.
    """
    cfg = state.config
    M = cfg.M
    thr = 3 * M if coop_threshold is None else coop_threshold
    streams = thr if coop_streams is None else coop_streams
    delta = policy.delta
    c, n = state.c, state.n
    state.slot += 1

    uc1 = state.eligible(1)
    uc2 = state.eligible(2)
    s1 = len(uc1) >= thr
    s2 = len(uc2) >= thr

    if s1 or s2:
        if s1 and s2:
            if policy.mode == "priority-1":
                b = 1
            elif policy.mode == "priority-2":
                b = 2
            else:
                b = 1 if rng.random() < 0.5 else 2
        else:
            b = 1 if s1 else 2
        pool = uc1 if b == 1 else uc2
        users = pool if len(pool) == streams else rng.sample(pool, streams)
        bits = 0.0
        for k in users:
            d = state.qf[k] - c[k]
            if delta < d:
                d = delta
            rem = 1.0 - c[k] - n[k]
            if rem < d:
                d = rem
            c[k] += d
            bits += d
            if c[k] + n[k] >= 1 - _EPS:
                state.completed[k] += 1
                c[k] = 0.0
                n[k] = 0.0
        return "coop", b, users, bits

    n1, n2 = len(state.k1), len(state.k2)
    ok1, ok2 = n1 >= M, n2 >= M
    if not ok1 and not ok2:
        return "idle", 0, [], 0.0  # unreachable when K >= 3M
    if ok1 and ok2:
        b = 1 if rng.random() < 0.5 else 2
    else:
        b = 1 if ok1 else 2
    pool = state.k1 if b == 1 else state.k2
    users = pool if len(pool) == M else rng.sample(pool, M)
    bits = 0.0
    for k in users:
        d = 1.0 - c[k] - n[k]
        if delta < d:
            d = delta
        n[k] += d
        bits += d
        if c[k] + n[k] >= 1 - _EPS:
            state.completed[k] += 1
            c[k] = 0.0
            n[k] = 0.0
    return "bsonly", b, users, bits


def _run_engine(config, q, pi, policy, slots, seed, coop_threshold,
                coop_streams, dof_of, trace_path=None):
    if slots < 1:
        raise DomainError("need at least one slot")
    state = init_state(config, q, pi)
    rng = random.Random(seed)
    coop = [0, 0]
    bsonly = [0, 0]
    idle = 0

    writer = ctx = None
    if trace_path is not None:
        ctx = open(trace_path, "w", newline="")
        writer = csv.writer(ctx)
        writer.writerow(["slot", "mode", "serving_bs", "scheduled_users",
                         "delivered_bits"])
    try:
        for t in range(slots):
            mode, b, users, bits = step(state, policy, rng,
                                        coop_threshold, coop_streams)
            if mode == "coop":
                coop[b - 1] += 1
            elif mode == "bsonly":
                bsonly[b - 1] += 1
            else:
                idle += 1
            if writer is not None:
                writer.writerow([t + 1, mode, b,
                                 ";".join(str(k + 1) for k in users),
                                 f"{bits:.12g}"])
    finally:
        if ctx is not None:
            ctx.close()

    emp = (coop[0] + coop[1]) / slots
    return SimResult(
        slots_total=slots,
        coop_slots=(coop[0], coop[1]),
        bsonly_slots=(bsonly[0], bsonly[1]),
        idle_slots=idle,
        empirical_coop=emp,
        per_user_throughput=tuple(done / slots for done in state.completed),
        dof_count=dof_of(emp),
    )


def run(config: NetworkConfig, q: CacheVector, pi: Urp, policy: SlotPolicy,
        slots: int, seed: int, trace_path=None) -> SimResult:
    """Simulate the shared-relay protocol for a fixed request profile.

    ``dof_count`` counts delivered streams: M per BS-only slot, 3M per
    cooperative slot, i.e. ``M (1 + 2 p)`` at cooperative fraction p.
    """
    M = config.M
    return _run_engine(config, q, pi, policy, slots, seed,
                       coop_threshold=3 * M, coop_streams=3 * M,
                       dof_of=lambda p: M * (1 + 2 * p),
                       trace_path=trace_path)


def run_separate_rs(config: NetworkConfig, q: CacheVector, pi: Urp,
                    slots: int, seed: int, delta: float = 1.0 / 64,
                    trace_path=None) -> SimResult:
    """Simulate the baseline where each BS owns a private M-antenna relay.

    Each relay holds half the budget and serves only its BS's files, so a
    cooperative slot carries 2M streams and needs 2M eligible users;
    ``dof_count`` is ``M (1 + p)``.  Channel sharing is unchanged.
    """
    M = config.M
    half = config.cache_budget / 2.0
    sizes = config.file_sizes
    for gw in (1, 2):
        w = sum(sizes[f - 1] * q.q[f - 1] for f in config.owned_files(gw))
        if w > half + 1e-9:
            raise DomainError(
                f"gateway {gw} placement needs {w:.6g} but each separate "
                f"relay holds only {half:.6g}")
    policy = SlotPolicy(mode="fair-coin", delta=delta)
    return _run_engine(config, q, pi, policy, slots, seed,
                       coop_threshold=2 * M, coop_streams=2 * M,
                       dof_of=lambda p: M * (1 + p),
                       trace_path=trace_path)
