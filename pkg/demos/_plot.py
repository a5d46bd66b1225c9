"""Optional plotting helper shared by the demos.

Plots are skipped when matplotlib is missing or THZSIM_DEMO_FIGURES=0.
"""

import os
from pathlib import Path

OUT = Path(__file__).resolve().parent / "figures"


def figure():
    if os.environ.get("THZSIM_DEMO_FIGURES", "1") == "0":
        return None
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    return plt


def save(plt, name):
    OUT.mkdir(exist_ok=True)
    path = OUT / name
    plt.savefig(path, dpi=120, bbox_inches="tight")
    plt.close("all")
    print(f"saved {path}")
