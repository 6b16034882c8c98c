"""Experiment driver: capacity sweeps over placement schemes.

For every (scheme, capacity) pair the driver fits a placement on
training request profiles, scores it analytically on held-out profiles,
optionally cross-checks with the slot simulator, and emits one CSV row.
A JSON sidecar records the chosen placements and, unless disabled, a PNG
renders the curves next to the CSV.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import analytics, optimizer, simulator
from .model import ConfigurationError, DomainError, NetworkConfig, load_scenario
from .sampler import PopularityModel, sample_batch

SCHEMES = ("optimal", "saa-walk", "uniform", "infinite", "separate-rs")

CSV_HEADER = ["scheme", "capacity", "dof_analytic", "dof_sim", "dof_sim_ci",
              "coop_prob", "n_samples", "seed"]

# substreams of the experiment seed
_TRAIN, _EVAL, _SIM = 1, 2, 3


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one sweep invocation depends on."""

    config: NetworkConfig
    schemes: tuple
    capacities: tuple
    n_samples: int = 400
    n_eval_samples: int = 200
    simulate: bool = False
    slots: int = 20000
    delta: float = 1.0 / 64
    seed: int = None
    sim_runs: int = 5

    def __post_init__(self):
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigurationError(
                    f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
        caps = tuple(float(c) for c in self.capacities)
        if not caps:
            raise ConfigurationError("capacity grid is empty")
        if any(b >= a for a, b in zip(caps[1:], caps)):
            raise ConfigurationError("capacity grid must be strictly increasing")
        total = self.config.total_size
        if caps[0] < 0 or caps[-1] > total + 1e-9:
            raise ConfigurationError(
                f"capacities must lie in [0, {total}] for this catalog")
        if self.n_samples < 1 or self.n_eval_samples < 1:
            raise ConfigurationError("sample counts must be at least 1")
        if self.slots < 1 or self.sim_runs < 1:
            raise ConfigurationError("slots and sim-runs must be at least 1")
        if not 0 < self.delta <= 1:
            raise ConfigurationError("delta must lie in (0, 1]")
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.seed is None:
            object.__setattr__(self, "seed", self.config.seed)

    def guard_schemes(self):
        if "optimal" in self.schemes and self.config.L > optimizer.ENUMERATION_LIMIT:
            raise ConfigurationError(
                f"scheme 'optimal' enumerates vertices and supports at most "
                f"{optimizer.ENUMERATION_LIMIT} files (catalog has {self.config.L}); "
                f"drop it or use saa-walk")


def _fit_placement(scheme, cfg, train):
    """Returns (CacheVector, meta dict with objective/steps if any)."""
    if scheme == "uniform":
        return optimizer.uniform_placement(cfg), {}
    if scheme == "infinite":
        return optimizer.infinite_placement(cfg), {}
    poly = optimizer.Polyhedron.from_config(cfg)
    if scheme == "saa-walk":
        q, est, steps = optimizer.vertex_walk(train, poly, cfg)
        return q, {"objective": est.value, "steps": steps}
    if scheme == "optimal":
        q, est = optimizer.global_opt_bruteforce(train, poly, cfg)
        return q, {"objective": est.value}
    if scheme == "separate-rs":
        q, est, steps = optimizer.separate_rs_placement(train, cfg)
        return q, {"objective": est.value, "steps": steps}
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def _analytic_row(scheme, cfg, q, eval_samples):
    """Held-out mean cooperative probability and the matching DoF."""
    if scheme == "separate-rs":
        ps = [analytics.per_urp_coop_separate(cfg, q, pi) for pi in eval_samples]
        mean_p = float(np.mean(ps))
        return mean_p, cfg.M * (1 + mean_p)
    ps = [analytics.per_urp_coop(cfg, q, pi).p_coop for pi in eval_samples]
    mean_p = float(np.mean(ps))
    return mean_p, analytics.dof(mean_p, cfg.M)


def _simulate_row(scheme, cfg, q, spec, sim_profiles, capacity_index):
    """Empirical DoF over independent runs: mean and normal half-width."""
    vals = []
    for r, pi in enumerate(sim_profiles):
        run_seed = (spec.seed & 0xFFFFFFFF) * 1000003 + capacity_index * 977 + r
        if scheme == "separate-rs":
            res = simulator.run_separate_rs(cfg, q, pi, spec.slots, run_seed,
                                            delta=spec.delta)
        else:
            policy = simulator.SlotPolicy(mode="fair-coin", delta=spec.delta)
            res = simulator.run(cfg, q, pi, policy, spec.slots, run_seed)
        vals.append(res.dof_count)
    mean = float(np.mean(vals))
    if len(vals) > 1:
        ci = 1.96 * float(np.std(vals, ddof=1)) / np.sqrt(len(vals))
    else:
        ci = 0.0
    return mean, ci


def run_experiment(spec: ExperimentSpec):
    """One row per (scheme, capacity): analytic DoF on held-out profiles,
    optimizer metadata, and optionally simulated DoF with a confidence
    half-width.  Returns (rows, placements)."""
    spec.guard_schemes()
    model = PopularityModel.from_config(spec.config)
    train = sample_batch(model, spec.n_samples, spec.seed, stream=_TRAIN)
    eval_samples = sample_batch(model, spec.n_eval_samples, spec.seed, stream=_EVAL)
    sim_profiles = sample_batch(model, spec.sim_runs, spec.seed, stream=_SIM) \
        if spec.simulate else []

    rows = []
    placements = {}
    for scheme in spec.schemes:
        placements[scheme] = {}
        for ci, cap in enumerate(spec.capacities):
            cfg = spec.config.with_budget(cap)
            q, meta = _fit_placement(scheme, cfg, train)
            mean_p, dof_analytic = _analytic_row(scheme, cfg, q, eval_samples)
            dof_sim = dof_ci = None
            if spec.simulate:
                dof_sim, dof_ci = _simulate_row(scheme, cfg, q, spec,
                                                sim_profiles, ci)
            rows.append({
                "scheme": scheme,
                "capacity": cap,
                "dof_analytic": dof_analytic,
                "dof_sim": dof_sim,
                "dof_sim_ci": dof_ci,
                "coop_prob": mean_p,
                "n_samples": spec.n_samples,
                "seed": spec.seed,
            })
            placements[scheme][f"{cap:.10g}"] = dict(
                q=[float(x) for x in q.q], budget_exempt=q.budget_exempt,
                n_samples=spec.n_samples, **meta)
    return rows, placements


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def sweep_and_emit(spec: ExperimentSpec, out_path, plot: bool = True):
    """Run the sweep and write CSV + placement sidecar (+ PNG)."""
    rows, placements = run_experiment(spec)
    out_path = str(out_path)
    sidecar = _with_suffix(out_path, ".placements.json")
    figure = _with_suffix(out_path, ".png")
    try:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
        with open(sidecar, "w") as fh:
            json.dump(placements, fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise RuntimeError(f"cannot write results near {out_path}: {exc}") from exc
    if plot:
        from . import plots
        cfg = spec.config
        plots.render_sweep(rows, figure,
                           title=f"L={cfg.L} K={cfg.K} M={cfg.M} gamma={cfg.gamma}")
    return rows


def _with_suffix(path: str, suffix: str) -> str:
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + suffix


def _parse_floats(text: str):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated number list, got {text!r}")


def _phy_ladder(args, config) -> int:
    from . import phy, plots
    powers = _parse_floats(args.powers)
    seed = args.seed if args.seed is not None else config.seed
    rows = phy.rate_ratio_ladder(config, powers, args.trials, seed)
    model = PopularityModel.from_config(config)
    pi = sample_batch(model, 1, seed, stream=_EVAL)[0]
    q = optimizer.uniform_placement(config)
    for row in rows:
        row["dof_estimate"] = phy.dof_estimate(
            config, q, pi, row["power"], args.phy_slots, seed)
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["power", "ratio_mean", "ratio_std", "dof_estimate"])
                for row in rows:
                    writer.writerow([_fmt(row[k]) for k in
                                     ("power", "ratio_mean", "ratio_std", "dof_estimate")])
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
        if not args.no_plot:
            plots.render_phy_ladder(rows, _with_suffix(args.out, ".png"))
    else:
        for row in rows:
            print(f"P={row['power']:.3g} ratio={row['ratio_mean']:.4f} "
                  f"(+/-{row['ratio_std']:.4f}) dof={row['dof_estimate']:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="relaycache",
        description="Capacity sweeps for a cached relay shared by two BSs; "
                    "file indices in scenario files are 1-based.")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--scheme", default="saa-walk",
                   help="comma-separated placement schemes: " + ", ".join(SCHEMES))
    p.add_argument("--capacities", default=None,
                   help="comma-separated cache budgets (default: scenario budget)")
    p.add_argument("--samples", type=int, default=400,
                   help="training request profiles for the optimizers")
    p.add_argument("--eval-samples", type=int, default=200,
                   help="held-out profiles for reported DoF")
    p.add_argument("--simulate", action="store_true",
                   help="also run the slot simulator per row")
    p.add_argument("--slots", type=int, default=20000, help="slots per simulation run")
    p.add_argument("--delta", type=float, default=1.0 / 64,
                   help="per-user delivery per slot in segment units")
    p.add_argument("--seed", type=int, default=None,
                   help="experiment seed (default: scenario seed)")
    p.add_argument("--sim-runs", type=int, default=5,
                   help="independent simulator runs per row")
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--no-plot", action="store_true",
                   help="skip the PNG next to the CSV")
    p.add_argument("--phy-ladder", action="store_true",
                   help="instead of a sweep, emit the beamforming rate-ratio "
                        "ladder (power, ratio_mean, ratio_std, dof_estimate)")
    p.add_argument("--powers", default="1e2,1e4,1e6,1e8",
                   help="power ladder for --phy-ladder")
    p.add_argument("--trials", type=int, default=1000,
                   help="Monte Carlo trials per rung for --phy-ladder")
    p.add_argument("--phy-slots", type=int, default=200,
                   help="slots per rate-slope estimate for --phy-ladder")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_scenario(args.scenario)
        if args.phy_ladder:
            return _phy_ladder(args, config)
        caps = _parse_floats(args.capacities) if args.capacities is not None \
            else (config.cache_budget,)
        spec = ExperimentSpec(
            config=config,
            schemes=tuple(s.strip() for s in args.scheme.split(",") if s.strip()),
            capacities=caps,
            n_samples=args.samples,
            n_eval_samples=args.eval_samples,
            simulate=args.simulate,
            slots=args.slots,
            delta=args.delta,
            seed=args.seed,
            sim_runs=args.sim_runs,
        )
        spec.guard_schemes()
        if args.out:
            sweep_and_emit(spec, args.out, plot=not args.no_plot)
        else:
            rows, _ = run_experiment(spec)
            print(",".join(CSV_HEADER))
            for row in rows:
                print(",".join(_fmt(row[k]) for k in CSV_HEADER))
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
