"""Static SVG figures. Output is byte-stable for identical inputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "svemwmt"
plt.rcParams["svg.fonttype"] = "none"

_SAVE = {"format": "svg", "metadata": {"Date": None, "Creator": None}}


def _strip(ax, values, x, color, rng, label):
    jitter = rng.uniform(-0.12, 0.12, len(values))
    ax.scatter(x + jitter, values, s=12, alpha=0.7, color=color, label=label)


def distance_panel(results, path):
    """Side-by-side reference vs observed distance strips, one panel per response."""
    from .report import format_p

    names = list(results)
    fig, axes = plt.subplots(1, len(names), figsize=(3.2 * len(names), 3.6), squeeze=False)
    for ax, name in zip(axes[0], names):
        r = results[name]
        rng = np.random.default_rng(0)
        ax.boxplot([r.d_ref, r.d_obs], positions=[0, 1], widths=0.5, showfliers=False)
        _strip(ax, r.d_ref, 0, "tab:gray", rng, "permuted")
        _strip(ax, r.d_obs, 1, "tab:red", rng, "observed")
        ax.set_xticks([0, 1], ["reference", "observed"])
        ax.set_title(f"{name}\np = {format_p(r.p_value)}", fontsize=10)
        ax.set_ylabel("Mahalanobis distance")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def power_plot(table, path, title=None):
    """Power against beta, one line per method. ``table`` has beta/method/rejections/trials."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for method, grp in table.groupby("method", sort=True):
        grp = grp.sort_values("beta")
        ax.plot(grp["beta"], grp["rejections"] / grp["trials"], marker="o", label=method)
    ax.axhline(0.05, color="k", lw=0.6, ls=":")
    ax.set_xlabel("beta")
    ax.set_ylabel("power")
    ax.set_ylim(0, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def surface_plot(T, v, path, x="x1", y="x2"):
    fig, ax = plt.subplots(figsize=(4.4, 3.6))
    sc = ax.scatter(T[x], T[y], c=v, s=3, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="sampled response")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
