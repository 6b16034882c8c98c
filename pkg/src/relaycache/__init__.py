"""Cached-relay network toolkit: closed forms, sampling, placement
optimization, slot simulation and channel-level verification."""

from .analytics import CoopStats, HessianBlock, ModifiedPlacement, \
    PriorityProbs, coop_mass, coop_probability, dof, hessian_block, \
    modify_placement, per_urp_coop, per_urp_coop_separate, \
    priority_probability, separate_coop_probability
from .model import CacheVector, ConfigurationError, DimensionGuardError, \
    DomainError, NetworkConfig, Urp, UserPartition, gather_placement, \
    load_scenario, partition_users
from .optimizer import ObjectiveEstimate, Polyhedron, Vertex, \
    enumerate_vertices, global_opt_bruteforce, infinite_placement, neighbors, \
    saa_objective, separate_rs_placement, uniform_placement, vertex_walk
from .sampler import PopularityModel, sample_batch, sample_urp, zipf_pmf
from .simulator import SimResult, SlotPolicy, init_state, run, \
    run_separate_rs, step
from .phy import BeamformerSet, ChannelSet, dof_estimate, rate_ratio_ladder, \
    sample_channels, stream_rates, zf_bs_only, zf_coop

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
