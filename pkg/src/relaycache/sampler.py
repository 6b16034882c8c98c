"""Request-profile sampling from per-gateway Zipf popularity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError, DomainError, NetworkConfig, Urp


def zipf_pmf(n: int, gamma: float) -> np.ndarray:
    """Zipf probabilities over popularity ranks 1..n: p_r = r^-gamma / sum."""
    if n < 1:
        raise DomainError("catalog size must be at least 1")
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    ranks = np.arange(1, n + 1, dtype=float)
    weights = ranks ** (-gamma)
    return weights / weights.sum()


@dataclass(frozen=True)
class PopularityModel:
    """Per-gateway catalogs with Zipf popularity and a gateway coin flip.

    Within each gateway the popularity rank maps to file index in
    ascending order (rank 1 = lowest owned index).  A user first picks
    gateway 1 with probability ``gateway_prob``, then a file from that
    gateway's Zipf law.  A gateway owning no files is never picked.
    """

    n_users: int
    catalog1: tuple
    catalog2: tuple
    gamma: float
    gateway_prob: float = 0.5

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigurationError("need at least one user")
        if not self.catalog1 and not self.catalog2:
            raise ConfigurationError("both gateway catalogs are empty")
        if not 0 <= self.gateway_prob <= 1:
            raise ConfigurationError("gateway_prob must lie in [0, 1]")
        p = self.gateway_prob
        if not self.catalog1:
            p = 0.0
        elif not self.catalog2:
            p = 1.0
        object.__setattr__(self, "gateway_prob", p)
        object.__setattr__(self, "catalog1", tuple(sorted(self.catalog1)))
        object.__setattr__(self, "catalog2", tuple(sorted(self.catalog2)))

    @classmethod
    def from_config(cls, config: NetworkConfig,
                    gateway_prob: float = 0.5) -> "PopularityModel":
        return cls(n_users=config.K,
                   catalog1=config.owned_files(1),
                   catalog2=config.owned_files(2),
                   gamma=config.gamma,
                   gateway_prob=gateway_prob)

    def pmf(self, gateway: int) -> np.ndarray:
        catalog = self.catalog1 if gateway == 1 else self.catalog2
        return zipf_pmf(len(catalog), self.gamma)


def sample_urp(model: PopularityModel, rng: np.random.Generator) -> Urp:
    """Draw one request profile: independent gateway coin + Zipf file pick."""
    pmf1 = model.pmf(1) if model.catalog1 else None
    pmf2 = model.pmf(2) if model.catalog2 else None
    pi = []
    for _ in range(model.n_users):
        if rng.random() < model.gateway_prob:
            catalog, pmf = model.catalog1, pmf1
        else:
            catalog, pmf = model.catalog2, pmf2
        rank = rng.choice(len(catalog), p=pmf)
        pi.append(catalog[rank])
    return Urp(pi=tuple(pi))


def sample_batch(model: PopularityModel, n_samples: int, seed: int,
                 stream: int = 0) -> list:
    """Draw ``n_samples`` independent request profiles.

    Each sample uses its own counter-based substream derived from
    ``(seed, stream, index)``, so batches are reproducible and any prefix
    of a batch is stable under extension.  Distinct ``stream`` values
    yield disjoint batches for the same seed (e.g. training vs held-out
    evaluation profiles).
    """
    if n_samples < 1:
        raise DomainError("need at least one sample")
    base = int(seed) & 0xFFFFFFFFFFFFFFFF  # SeedSequence wants non-negative words
    return [sample_urp(model, np.random.default_rng([base, stream, i]))
            for i in range(n_samples)]
