"""Figure rendering for the CLI report path.

Each figure-producing subcommand writes its CSV and, unless disabled,
a PNG next to it with the same stem.  Rendering is intentionally plain:
one curve per file, optional reference curve, no styling beyond
readable defaults.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["figure.figsize"] = (6.0, 4.0)
plt.rcParams["figure.dpi"] = 150
plt.rcParams["savefig.bbox"] = "tight"


def png_path_for(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")


def render_curve(xs, ys, xlabel: str, ylabel: str, out_path,
                 reference=None, title: str | None = None) -> Path:
    """Plot one curve (and an optional reference) to a PNG file.

    ``reference`` is a (xs, ys, label) triple drawn as a dotted line.
    Returns the written path.
    """
    fig, ax = plt.subplots()
    ax.plot(xs, ys, color="tab:blue", label="estimate (median)")
    if reference is not None:
        ref_x, ref_y, label = reference
        ax.plot(ref_x, ref_y, color="black", linestyle=":", label=label)
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    out_path = Path(out_path)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
