"""Report assembly: deterministic JSON, tab-delimited text and optional figures."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .speclang import _show  # noqa: E402

SCHEMA_VERSION = 1


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def as_text(report: dict) -> str:
    """One ``key<TAB>value`` line per scalar; nested values are flattened with dots."""
    lines: list = []

    def walk(prefix: str, v) -> None:
        if isinstance(v, dict):
            for k in sorted(v):
                walk(f"{prefix}.{k}" if prefix else str(k), v[k])
        elif isinstance(v, list):
            if not v:
                lines.append(f"{prefix}\t[]")
            for i, x in enumerate(v):
                walk(f"{prefix}.{i}", x)
        else:
            lines.append(f"{prefix}\t{v}")

    walk("", report)
    return "\n".join(lines) + "\n"


def base(verb: str, source: str, query: Optional[str] = None) -> dict:
    out = {"schema": SCHEMA_VERSION, "verb": verb, "file": source}
    if query is not None:
        out["query"] = query
    return out


# -- figures ---------------------------------------------------------------------------


def _finish(fig, path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None} if path.endswith(".png") else None)
    plt.close(fig)
    return path


def sequence_chart(run, intruder: str, path: str) -> str:
    """Message sequence chart: one lane per session plus the intruder lane."""
    lanes = [f"{s.role}#{s.tag}\n({s.actor.id})" for s in run.sessions] + [f"intruder\n({intruder})"]
    n = len(run.events)
    fig, ax = plt.subplots(figsize=(2.2 * len(lanes) + 2, 0.9 * (2 * n) + 1.5))
    xi = len(lanes) - 1
    for x, name in enumerate(lanes):
        ax.plot([x, x], [0, -(2 * n + 1)], color="0.7", lw=1, zorder=0)
        ax.text(x, 0.4, name, ha="center", va="bottom", fontsize=9, family="monospace")
    y = -0.5
    for i, j in run.events:
        st_ = run.sessions[i].steps[j]
        for src, dst, msg in ((xi, i, st_.recv), (i, xi, st_.send)):
            ax.annotate("", xy=(dst, y), xytext=(src, y), arrowprops=dict(arrowstyle="->", lw=1))
            ax.text((src + dst) / 2, y + 0.12, _show(msg), ha="center", va="bottom", fontsize=7, family="monospace")
            y -= 1
    ax.set_xlim(-0.7, len(lanes) - 0.3)
    ax.set_ylim(y - 0.2, 1.2)
    ax.axis("off")
    return _finish(fig, path)


def iteration_chart(points: list, path: str) -> str:
    """Saturation passes against the quadratic bound, one dot per instance."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    zs = [z for z, _ in points]
    its = [i for _, i in points]
    ax.scatter(zs, its, s=12, label="fixpoint passes")
    if zs:
        xs = list(range(1, max(zs) + 1))
        ax.plot(xs, [x * x for x in xs], color="C1", lw=1, label="|Z|^2")
    ax.set_xlabel("|Z|")
    ax.set_ylabel("passes")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    return _finish(fig, path)


__all__ = ["dumps", "as_text", "base", "sequence_chart", "iteration_chart"]
