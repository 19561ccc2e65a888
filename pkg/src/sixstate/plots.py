"""Render sweep results to a figure file alongside the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_X_COLUMN = {"L": "L_km", "N_source": "N_source", "lambda": "lambda_opt"}
_X_LABEL = {"L": "distance (km)", "N_source": "emitted pulses",
            "lambda": "brightness"}


def render_sweep_figure(rows: list, variable: str, path: str, *,
                        threshold: float = None) -> None:
    """Plot the swept quantity against the sweep variable and save to path.

    Brightness sweeps show the source QBER with the tolerable-QBER line
    (and the rate on a twin axis when present); distance and pulse-count
    sweeps show the secret-key rate on a log scale.  Rows with empty cells
    are skipped.
    """
    x_key = _X_COLUMN[variable]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.set_xlabel(_X_LABEL[variable])

    if variable == "lambda":
        pts = [(r[x_key], r["e_pdc"]) for r in rows
               if r.get(x_key) is not None and r.get("e_pdc") is not None]
        if pts:
            ax.plot(*zip(*pts), marker="o", color="tab:blue", label="source QBER")
        if threshold is not None:
            ax.axhline(threshold, color="tab:red", linestyle="--",
                       label="tolerable QBER")
        ax.set_xscale("log")
        ax.set_ylabel("QBER")
        ax.legend(loc="best")
        rate_pts = [(r[x_key], r["rate"]) for r in rows
                    if r.get(x_key) is not None and r.get("rate") is not None
                    and r["rate"] > 0.0]
        if rate_pts:
            twin = ax.twinx()
            twin.plot(*zip(*rate_pts), marker=".", color="tab:green", alpha=0.7)
            twin.set_yscale("log")
            twin.set_ylabel("key rate (bits/pulse)", color="tab:green")
    else:
        pts = [(r[x_key], r["rate"]) for r in rows
               if r.get(x_key) is not None and r.get("rate") is not None
               and r["rate"] > 0.0]
        if pts:
            ax.plot(*zip(*pts), marker="o", color="tab:blue")
        ax.set_yscale("log")
        if variable == "N_source":
            ax.set_xscale("log")
        ax.set_ylabel("secret-key rate (bits/pulse)")

    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
