"""Figure rendering for sweep reports.

Kept deliberately small: the CSV is the machine-readable contract, the
PNG is the human-readable view of the same rows.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SCHEME_STYLE = {
    "infinite": dict(color="tab:green", marker="^"),
    "optimal": dict(color="tab:blue", marker="o"),
    "saa-walk": dict(color="tab:orange", marker="s"),
    "uniform": dict(color="tab:red", marker="v"),
    "separate-rs": dict(color="tab:purple", marker="d"),
}


def render_sweep(rows, path, title=None) -> None:
    """Plot DoF versus cache capacity, one curve per scheme.

    ``rows`` are the dicts emitted by the experiment driver; analytic
    values draw as lines, simulated values as error bars on top.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    schemes = []
    for row in rows:
        if row["scheme"] not in schemes:
            schemes.append(row["scheme"])
    for scheme in schemes:
        pts = [r for r in rows if r["scheme"] == scheme]
        pts.sort(key=lambda r: r["capacity"])
        caps = [r["capacity"] for r in pts]
        style = _SCHEME_STYLE.get(scheme, {})
        ana = [r["dof_analytic"] for r in pts]
        ax.plot(caps, ana, label=scheme, markersize=4, linewidth=1.4, **style)
        sims = [(r["capacity"], r["dof_sim"], r["dof_sim_ci"]) for r in pts
                if r.get("dof_sim") is not None]
        if sims:
            xs, ys, cis = zip(*sims)
            ax.errorbar(xs, ys, yerr=cis, fmt="none", capsize=3,
                        color=style.get("color"), alpha=0.6)
    ax.set_xlabel("cache capacity (normalized)")
    ax.set_ylabel("DoF")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=9)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_phy_ladder(rows, path) -> None:
    """Plot the cooperative/BS-only rate ratio against transmit power."""
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    powers = [r["power"] for r in rows]
    means = [r["ratio_mean"] for r in rows]
    stds = [r["ratio_std"] for r in rows]
    ax.errorbar(powers, means, yerr=stds, marker="o", capsize=3)
    ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    ax.set_xscale("log")
    ax.set_xlabel("BS power budget")
    ax.set_ylabel("per-stream rate ratio (coop / BS-only)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
