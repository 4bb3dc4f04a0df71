"""Draw one accuracy-vs-iteration figure per attack.

Style comes from the committed style.mplstyle and savefig metadata is pinned,
so rendering the same curves twice yields byte-identical files.
"""

from __future__ import annotations

from importlib import resources

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .curves import CurveSet

_STYLE = resources.files("dstar_plots").joinpath("style.mplstyle")
_MARKERS = ("o", "s", "^", "D", "v", "P", "X")


def build_figure(curves: CurveSet):
    """Figure with one labeled line per rule; caller owns closing it."""
    with plt.style.context(str(_STYLE)):
        fig, ax = plt.subplots()
        for idx, (gar, points) in enumerate(curves.series):
            xs = [it for it, _ in points]
            ys = [acc for _, acc in points]
            ax.plot(xs, ys, marker=_MARKERS[idx % len(_MARKERS)], label=gar)
        ax.set_xlabel("iteration")
        ax.set_ylabel("accuracy")
        ax.set_ylim(0.0, 1.05)
        ax.set_title(f"attack: {curves.attack}")
        ax.legend(title="rule")
    return fig


def render(curves: CurveSet, out_path: str) -> str:
    fig = build_figure(curves)
    try:
        fig.savefig(out_path, format="png",
                    metadata={"Software": "dstar-plots"})
    finally:
        plt.close(fig)
    return out_path
