"""Optional PNG output for CLI runs.  matplotlib is imported only here."""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("--plot needs matplotlib (pip install artifact[plot])") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render(kind: str, payload: dict, out: Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "potential":
        ax.loglog(payload["norms"], payload["values"], "o", ms=3)
        ax.set_xlabel("|x|")
        ax.set_ylabel(payload["operator"])
    elif kind == "ratios":
        ax.semilogy(payload["ratios"], "o", ms=3)
        ax.set_xlabel("sample")
        ax.set_ylabel("lhs / rhs")
        ax.set_title(payload["title"])
    elif kind == "blowup":
        ax.loglog(payload["norms"], payload["ratios"], "o-")
        ax.invert_xaxis()
        ax.set_xlabel("|x_j|")
        ax.set_ylabel("u / reference")
        ax.set_title(payload["title"])
    elif kind == "regions":
        colours = {"A": "tab:blue", "B": "tab:green", "C": "tab:red", "D": "black"}
        for region, colour in colours.items():
            pts = [(r[0], r[1]) for r in payload["rows"] if r[2] == region]
            if pts:
                lam, sig = zip(*pts)
                ax.scatter(lam, sig, s=2, c=colour, label=region)
        ax.set_xlabel("lambda")
        ax.set_ylabel("sigma")
        ax.legend(markerscale=4)
    else:
        plt.close(fig)
        raise ValueError(f"unknown plot kind {kind!r}")
    path = Path(out) / f"{kind}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
