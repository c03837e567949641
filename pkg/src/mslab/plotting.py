"""Figures for CLI runs: rendered PNGs and a standalone script that redraws them from the CSV."""

from __future__ import annotations

import csv
import textwrap

# per command: x column, y column, optional error column, x log scale, y log scale, labels
FIGURES = {
    "limit-study": ("parameter", "estimate", "stderr", False, False, "small parameter", "seminorm"),
    "sharpness": ("parameter", "estimate", "stderr", False, False, "small parameter", "seminorm"),
    "avr": ("radius", "ratio", None, True, False, "r", "m(B_r) / r^N"),
    "entropy": ("radius", "quotient", None, False, False, "r", "log m(B_r) / r"),
    "seminorm": ("shell_hi", "contribution", "stderr", True, False, "shell outer radius", "contribution"),
    "check-mollifier": ("parameter", "value", None, True, False, "small parameter", "tail integral"),
    "decompose": ("parameter", "I", "I_stderr", True, True, "small parameter", "term value"),
}


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _groups(command, rows):
    key = {"check-mollifier": "delta", "decompose": "R"}.get(command)
    if key is None:
        return {"": rows}
    out = {}
    for r in rows:
        out.setdefault(f"{key} = {r[key]}", []).append(r)
    return out


def _decompose_terms(ax, grp, label, color):
    # one color per R; zero terms cannot sit on a log axis and are left out
    for col, style in (("I", "o-"), ("II", "s--"), ("III", "^:")):
        pts = [(float(r["parameter"]), float(r[col])) for r in grp if float(r[col]) > 0]
        if pts:
            x, y = zip(*pts)
            ax.plot(x, y, style, color=color, ms=3, label=f"{col}, {label}")


def render(command, csv_path, summary, png_path):
    """Draw the standard figure for ``command`` from its results CSV into ``png_path``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xcol, ycol, ecol, xlog, ylog, xlabel, ylabel = FIGURES[command]
    rows = [r for r in read_rows(csv_path) if r.get(ycol) not in (None, "", "inf")]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i, (label, grp) in enumerate(_groups(command, rows).items()):
        if command == "decompose":
            _decompose_terms(ax, grp, label, f"C{i}")
            continue
        x = [float(r[xcol]) for r in grp if r[xcol] != "inf"]
        y = [float(r[ycol]) for r in grp if r[xcol] != "inf"]
        if ecol:
            e = [float(r[ecol]) for r in grp if r[xcol] != "inf"]
            ax.errorbar(x, y, yerr=e, fmt="o-", ms=4, capsize=2, label=label or ycol)
        else:
            ax.plot(x, y, "o-", ms=3, label=label or ycol)
    res = summary.get("results", {})
    if "predicted" in res:
        ax.axhline(res["predicted"], color="k", lw=1, label="predicted 2 L ||u||^p")
    if "extrapolated" in res:
        ax.errorbar([0.0], [res["extrapolated"]], yerr=[res.get("uncertainty", 0.0)], fmt="D", color="C3", label="extrapolated")
    if "value" in res and command in ("avr",) and res.get("flag") == "finite":
        ax.axhline(res["value"], color="k", lw=1, label="estimate")
    ax.set_xscale("log" if xlog else "linear")
    if ylog:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(command)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return png_path


def plot_script(command):
    """Source of a standalone script that redraws the figure from results.csv and summary.json."""
    xcol, ycol, ecol, xlog, ylog, xlabel, ylabel = FIGURES[command]
    return textwrap.dedent(
        f"""\
        # Redraw the {command} figure: python plot.py  (needs matplotlib)
        import csv, json
        import matplotlib.pyplot as plt

        rows = list(csv.DictReader(open("results.csv")))
        rows = [r for r in rows if r["{xcol}"] != "inf" and r["{ycol}"] not in ("", "inf")]
        summary = json.load(open("summary.json"))["results"]
        x = [float(r["{xcol}"]) for r in rows]
        y = [float(r["{ycol}"]) for r in rows]
        fig, ax = plt.subplots()
        if {ecol!r}:
            ax.errorbar(x, y, yerr=[float(r[{ecol!r}]) for r in rows], fmt="o")
        else:
            ax.plot(x, y, "o-")
        if "predicted" in summary:
            ax.axhline(summary["predicted"], color="k", label="predicted")
        ax.set_xscale({"'log'" if xlog else "'linear'"})
        ax.set_yscale({"'log'" if ylog else "'linear'"})
        ax.set_xlabel({xlabel!r})
        ax.set_ylabel({ylabel!r})
        fig.savefig("figure_from_script.png", dpi=120)
        """
    )
