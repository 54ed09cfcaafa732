"""Matplotlib figure of a sigma_min sweep."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import SigmaReport  # noqa: E402

_STABLE_METADATA = {
    "png": {"Software": None},
    "svg": {"Creator": None, "Date": None},
    "pdf": {"Creator": None, "Producer": None, "CreationDate": None},
}


def plot_sweep(rep: SigmaReport, path, title: str = "", mark_k: float | None = None) -> Path:
    """Relative smallest singular value against k on log-log axes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ratios = [max(r, 1e-300) for r in rep.ratios]
    ax.loglog(rep.k_values, ratios, marker="o", ms=3, lw=1)
    if mark_k is not None:
        ax.axvline(mark_k, color="tab:red", ls="--", lw=1)
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\sigma_{\min}(K_k)\,/\,\|K_k\|$")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "png"
    # drop timestamps and version strings so repeated runs are byte-identical
    meta = _STABLE_METADATA.get(fmt, {})
    with plt.rc_context({"svg.hashsalt": "helmcert"}):
        fig.savefig(path, format=fmt, metadata=meta)
    plt.close(fig)
    return path
