"""Scenario configuration, user request profiles, and placement gathering.

Conventions used throughout the package:

* file indices are 1-based (file ``l`` owns the ``l``-th entry of the
  ownership array and of any placement vector),
* user indices are 1-based,
* gateways / base stations are numbered 1 and 2.

Placement vectors are stored as plain numpy arrays where entry ``l-1``
is the fraction of file ``l``'s parity bits held by the relay cache.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """A scenario or experiment description is malformed."""


class DomainError(ValueError):
    """A numeric argument lies outside the operation's domain."""


class DimensionGuardError(ConfigurationError):
    """An exhaustive-enumeration routine refused an oversized instance."""


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of one two-cell cached relay scenario."""

    M: int                        # antennas per BS (the relay has 2M)
    K: int                        # number of single-antenna users
    L: int                        # catalog size
    file_sizes: tuple             # normalized size of each file, length L
    cache_budget: float           # total normalized relay cache budget
    ownership: tuple              # gateway (1 or 2) owning each file, length L
    gamma: float = 2.0            # Zipf popularity skewness
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.L < 1:
            raise ConfigurationError("M, K and L must be positive")
        if self.K < 3 * self.M:
            raise ConfigurationError(
                f"need K >= 3M users for the protocol (got K={self.K}, M={self.M})")
        sizes = tuple(float(s) for s in self.file_sizes)
        if len(sizes) != self.L:
            raise ConfigurationError(f"file_sizes must have length L={self.L}")
        if any(s <= 0 for s in sizes):
            raise ConfigurationError("file sizes must be positive")
        owners = tuple(int(o) for o in self.ownership)
        if len(owners) != self.L:
            raise ConfigurationError(f"ownership must have length L={self.L}")
        if any(o not in (1, 2) for o in owners):
            raise ConfigurationError("ownership entries must be 1 or 2")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be non-negative")
        if not 0 <= self.cache_budget <= sum(sizes) + 1e-9:
            raise ConfigurationError(
                "cache_budget must lie in [0, total catalog size]; the "
                "unbounded-cache baseline is expressed by the infinite "
                "placement, not by an oversized budget")
        object.__setattr__(self, "file_sizes", sizes)
        object.__setattr__(self, "ownership", owners)

    @property
    def total_size(self) -> float:
        return float(sum(self.file_sizes))

    def owned_files(self, gateway: int) -> tuple:
        """1-based indices of the files stored at ``gateway``, ascending."""
        return tuple(l for l in range(1, self.L + 1)
                     if self.ownership[l - 1] == gateway)

    def with_budget(self, budget: float) -> "NetworkConfig":
        return dataclasses.replace(self, cache_budget=float(budget))


@dataclass(frozen=True)
class CacheVector:
    """A cache content placement: per-file fractions in [0, 1].

    ``budget_exempt`` marks the infinite-caching baseline, whose all-ones
    placement deliberately ignores the cache budget.
    """

    q: np.ndarray
    budget_exempt: bool = False

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=float).copy()
        if arr.ndim != 1:
            raise DomainError("placement must be a flat vector")
        if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
            raise DomainError("placement entries must lie in [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        arr.flags.writeable = False
        object.__setattr__(self, "q", arr)

    def __len__(self) -> int:
        return self.q.shape[0]

    def weight(self, file_sizes: Sequence[float]) -> float:
        """Cache space consumed under the given file sizes."""
        return float(np.dot(np.asarray(file_sizes, dtype=float), self.q))

    def feasible_for(self, config: NetworkConfig, tol: float = 1e-9) -> bool:
        if len(self) != config.L:
            return False
        if self.budget_exempt:
            return True
        return self.weight(config.file_sizes) <= config.cache_budget + tol


@dataclass(frozen=True)
class Urp:
    """A user request profile: the file index requested by each user."""

    pi: tuple

    def __post_init__(self):
        object.__setattr__(self, "pi", tuple(int(f) for f in self.pi))

    def __len__(self) -> int:
        return len(self.pi)


@dataclass(frozen=True)
class UserPartition:
    """1-based user indices split by serving BS, each ascending."""

    k1: tuple
    k2: tuple

    def size(self, gateway: int) -> int:
        return len(self.k1) if gateway == 1 else len(self.k2)

    def users(self, gateway: int) -> tuple:
        return self.k1 if gateway == 1 else self.k2


def partition_users(pi: Urp, ownership) -> UserPartition:
    """Split users by the gateway that owns their requested file.

    ``ownership`` is either the per-file tuple from :class:`NetworkConfig`
    or a mapping from 1-based file index to gateway.
    """
    if isinstance(ownership, Mapping):
        def owner_of(f):
            try:
                return ownership[f]
            except KeyError:
                raise ConfigurationError(f"file {f} has no owning gateway")
    else:
        owners = tuple(ownership)

        def owner_of(f):
            if not 1 <= f <= len(owners):
                raise ConfigurationError(f"file {f} has no owning gateway")
            return owners[f - 1]

    k1, k2 = [], []
    for user, f in enumerate(pi.pi, start=1):
        owner = owner_of(f)
        if owner == 1:
            k1.append(user)
        elif owner == 2:
            k2.append(user)
        else:
            raise ConfigurationError(f"file {f} owned by unknown gateway {owner}")
    return UserPartition(k1=tuple(k1), k2=tuple(k2))


def gather_placement(pi: Urp, q: CacheVector, partition: UserPartition,
                     gateway: int) -> np.ndarray:
    """Placement fractions of the files requested by one BS's users.

    Entry ``k`` is the placement of the file requested by the ``k``-th
    smallest user index in the gateway's user set; the result has length
    ``|K_i|`` and is empty when the gateway serves nobody.
    """
    if gateway not in (1, 2):
        raise DomainError("gateway must be 1 or 2")
    users = partition.users(gateway)
    if not users:
        return np.empty(0, dtype=float)
    idx = np.array([pi.pi[u - 1] - 1 for u in users], dtype=int)
    return q.q[idx]


def load_scenario(path) -> NetworkConfig:
    """Read a scenario JSON file.

    Required keys: ``M``, ``K``, ``L``, ``cache_budget``, ``ownership``
    (array of 1/2 with one entry per file), ``gamma``, ``seed``.
    ``file_sizes`` may be an array of length L, a positive number applied
    to every file, or the string ``"uniform"`` (all sizes 1); it defaults
    to uniform.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"scenario file {path} is not valid JSON: {exc}") from exc

    missing = [k for k in ("M", "K", "L", "cache_budget", "ownership", "gamma", "seed")
               if k not in raw]
    if missing:
        raise ConfigurationError(f"scenario file {path} lacks keys: {', '.join(missing)}")

    L = int(raw["L"])
    sizes = raw.get("file_sizes", "uniform")
    if isinstance(sizes, str):
        if sizes != "uniform":
            raise ConfigurationError(f"unknown file_sizes spec {sizes!r}")
        sizes = [1.0] * L
    elif isinstance(sizes, (int, float)):
        sizes = [float(sizes)] * L
    else:
        sizes = [float(s) for s in sizes]

    return NetworkConfig(
        M=int(raw["M"]),
        K=int(raw["K"]),
        L=L,
        file_sizes=tuple(sizes),
        cache_budget=float(raw["cache_budget"]),
        ownership=tuple(int(o) for o in raw["ownership"]),
        gamma=float(raw["gamma"]),
        seed=int(raw["seed"]),
    )
