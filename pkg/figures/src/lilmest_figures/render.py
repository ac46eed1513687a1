"""Render experiment outputs into publication artifacts.

Four batch jobs, selected with --kind:

  ratio_fig1     bounds.csv        -> PNG, radius ratio vs n, one curve per nu
  pulls_fig2     bai_summary.json  -> PNG, mean pulls / H1 vs K with min-max band
  sumbounds_fig3 sum_bounds.csv    -> PNG, the three scaled sum boundaries vs t
  table1         bai_summary.json  -> Markdown grid of correct proportions

Inputs are read-only; rendering never computes anything beyond what the
experiment summaries already aggregated.  Table output is byte-stable
across re-renders (images may embed encoder metadata).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

KINDS = ("ratio_fig1", "pulls_fig2", "sumbounds_fig3", "table1")

_CSV_SCHEMAS = {
    "ratio_fig1": ["nu", "n", "t_lil", "t_ub", "ratio"],
    "sumbounds_fig3": ["t", "jamieson", "howard", "maillard"],
}

_CELL_KEYS = (
    "scenario",
    "algorithm",
    "K",
    "trials",
    "no_stop",
    "correct_proportion",
    "pulls_mean",
    "pulls_min",
    "pulls_max",
    "h1",
)


class SchemaError(ValueError):
    """Input file does not match the expected experiment schema."""


def _load_csv(path: Path, kind: str) -> pd.DataFrame:
    frame = pd.read_csv(path)
    expected = _CSV_SCHEMAS[kind]
    got = list(frame.columns)
    if got != expected:
        missing = [c for c in expected if c not in got]
        extra = [c for c in got if c not in expected]
        offender = (missing + extra + ["<column order>"])[0]
        raise SchemaError(
            f"{path}: column {offender!r} does not match the {kind} schema "
            f"(expected {expected}, got {got})"
        )
    return frame


def _load_summary(path: Path) -> list[dict]:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    cells = payload.get("cells")
    if not isinstance(cells, list) or not cells:
        raise SchemaError(f"{path}: column 'cells' is missing or empty")
    for cell in cells:
        for key in _CELL_KEYS:
            if key not in cell:
                raise SchemaError(f"{path}: column {key!r} missing from a summary cell")
    return cells


def render_ratio_fig1(in_path: Path, out_path: Path) -> None:
    frame = _load_csv(in_path, "ratio_fig1")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for nu, block in frame.groupby("nu"):
        block = block.sort_values("n")
        ax.plot(block["n"], block["ratio"], label=f"confidence {nu:g}")
    ax.set_xscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("iterated-log radius / union-bound radius")
    ax.axhline(1.0, color="grey", lw=0.8, ls="--")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_sumbounds_fig3(in_path: Path, out_path: Path) -> None:
    frame = _load_csv(in_path, "sumbounds_fig3")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for column in ("jamieson", "howard", "maillard"):
        ax.plot(frame["t"], frame[column], label=column)
    ax.set_xscale("log")
    ax.set_xlabel("sample size t")
    ax.set_ylabel("boundary / union-bound threshold")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_pulls_fig2(in_path: Path, out_path: Path) -> None:
    cells = _load_summary(in_path)
    fig, ax = plt.subplots(figsize=(6.8, 4.4))
    groups: dict[tuple, list[dict]] = {}
    for cell in cells:
        groups.setdefault((cell["scenario"], cell["algorithm"]), []).append(cell)
    for (scenario, algorithm), block in sorted(groups.items()):
        block = sorted(block, key=lambda c: c["K"])
        ks = [c["K"] for c in block if c["pulls_mean"] is not None]
        mean = [c["pulls_mean"] / c["h1"] for c in block if c["pulls_mean"] is not None]
        lo = [c["pulls_min"] / c["h1"] for c in block if c["pulls_mean"] is not None]
        hi = [c["pulls_max"] / c["h1"] for c in block if c["pulls_mean"] is not None]
        if not ks:
            continue
        (line,) = ax.plot(ks, mean, marker="o", label=f"{algorithm} / {scenario}")
        ax.fill_between(ks, lo, hi, alpha=0.15, color=line.get_color())
    ax.set_xlabel("number of arms K")
    ax.set_ylabel("total pulls / H1")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_table1(in_path: Path, out_path: Path) -> None:
    cells = _load_summary(in_path)
    ks = sorted({c["K"] for c in cells})
    pairs = sorted({(c["scenario"], c["algorithm"]) for c in cells})
    by_key = {(c["scenario"], c["algorithm"], c["K"]): c for c in cells}
    lines = []
    header = ["scenario", "algorithm"] + [f"K={k}" for k in ks]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] * len(header)) + "|")
    for scenario, algorithm in pairs:
        row = [scenario, algorithm]
        for k in ks:
            cell = by_key.get((scenario, algorithm, k))
            if cell is None or cell["correct_proportion"] is None:
                row.append("NA")
            else:
                row.append(f"{cell['correct_proportion']:.3f}")
        lines.append("| " + " | ".join(row) + " |")
    Path(out_path).write_text("\n".join(lines) + "\n")


_RENDERERS = {
    "ratio_fig1": render_ratio_fig1,
    "pulls_fig2": render_pulls_fig2,
    "sumbounds_fig3": render_sumbounds_fig3,
    "table1": render_table1,
}


def render(kind: str, in_path: str | Path, out_path: str | Path) -> Path:
    if kind not in KINDS:
        raise SchemaError(f"unknown figure kind {kind!r}; expected one of {KINDS}")
    in_path = Path(in_path)
    if not in_path.exists():
        raise SchemaError(f"input {in_path} does not exist")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _RENDERERS[kind](in_path, out_path)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--out", dest="out_path", required=True)
    args = parser.parse_args(argv)
    try:
        out = render(args.kind, args.in_path, args.out_path)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
