"""Log-log figures for the report commands (PNG, written next to the CSV)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    # no timestamp in the PNG metadata
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def loglog(path, series, xlabel, ylabel, title=None):
    """series: list of (label, x, y, fit) with fit = (slope, intercept) or None."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for label, x, y, fit in series:
            x = np.asarray(x, float)
            y = np.asarray(y, float)
            ok = (x > 0) & (y > 0)
            pts = ax.loglog(x[ok], y[ok], "o", ms=4, label=label)
            if fit is not None and ok.any():
                slope, icpt = fit
                xs = np.geomspace(x[ok].min(), x[ok].max(), 50)
                ax.loglog(xs, np.exp(icpt) * xs**slope, "-", lw=1, color=pts[0].get_color(),
                          label=f"slope {slope:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(fontsize=8)
        return _save(fig, path)


def sequence(path, k, values, limit, ylabel, title=None):
    """Iterates against k with the limit drawn as a horizontal line."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(k, values, ".-", lw=1, label=ylabel)
        ax.axhline(limit, color="k", lw=0.8, ls="--", label=f"limit {limit:.6g}")
        ax.set_xlabel("k")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(fontsize=8)
        return _save(fig, path)


def slice_image(path, field2d, title=None):
    """A 2-d slice of a 4-d field (first two axes)."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        im = ax.imshow(np.asarray(field2d).T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
        fig.colorbar(im, ax=ax)
        ax.set_xlabel("x1")
        ax.set_ylabel("y1")
        ax.grid(False)
        if title:
            ax.set_title(title)
        return _save(fig, path)
