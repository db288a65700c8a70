"""Figure rendering for run logs and sweep summaries.

Figures are written to files next to the delimited record output; nothing
here opens a window (Agg backend only).
"""

from __future__ import annotations

from .kernel import CRASH, INVOKE, RESPOND, EventLog

_PALETTE = [
    "#4878d0", "#ee854a", "#6acc64", "#d65f5f",
    "#956cb4", "#8c613c", "#dc7ec0", "#797979",
]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def operation_intervals(log: EventLog) -> list[tuple[int, str, int, int]]:
    """(pid, label, start, end) for every operation in the log; operations
    left open by a crash extend to the log end."""
    out = []
    open_ops: dict[int, tuple[str, int]] = {}
    for ev in log.events:
        if ev.kind == INVOKE:
            label = f"{ev.detail.get('obj', '')}.{ev.detail.get('op', '')}"
            open_ops[ev.pid] = (label, ev.t)
        elif ev.kind == RESPOND and ev.pid in open_ops:
            label, start = open_ops.pop(ev.pid)
            out.append((ev.pid, label, start, ev.t))
    for pid, (label, start) in open_ops.items():
        out.append((pid, label + " (open)", start, len(log.events)))
    return out


def render_timeline(log: EventLog, path) -> None:
    """One lane per process: operation intervals as bars, crashes as x."""
    plt = _pyplot()
    intervals = operation_intervals(log)
    crashes = log.crashed_pids()
    n = log.n or max((pid for pid, *_ in intervals), default=1)
    fig, ax = plt.subplots(figsize=(9, 0.6 * n + 1.2))
    labels = sorted({label for _, label, _, _ in intervals})
    colors = {label: _PALETTE[i % len(_PALETTE)] for i, label in enumerate(labels)}
    for pid, label, start, end in intervals:
        ax.barh(
            pid,
            max(end - start, 0.4),
            left=start,
            height=0.5,
            color=colors[label],
            edgecolor="black",
            linewidth=0.4,
        )
    for pid, t in crashes.items():
        ax.plot(t, pid, marker="x", color="red", markersize=10, markeredgewidth=2)
    handles = [plt.Rectangle((0, 0), 1, 1, color=colors[l]) for l in labels]
    if handles:
        ax.legend(handles, labels, loc="upper right", fontsize=7)
    ax.set_yticks(range(1, n + 1))
    ax.set_yticklabels([f"p{p}" for p in range(1, n + 1)])
    ax.set_xlabel("step")
    ax.set_title(f"{log.protocol} seed={log.seed} outcome={log.outcome}")
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep(counts: dict[str, int], path, title: str = "sweep") -> None:
    plt = _pyplot()
    keys = list(counts)
    values = [counts[k] for k in keys]
    fig, ax = plt.subplots(figsize=(7, 3.2))
    bars = ax.bar(keys, values, color=_PALETTE[: len(keys)])
    for bar, value in zip(bars, values):
        ax.annotate(
            str(value),
            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
            ha="center",
            va="bottom",
            fontsize=8,
        )
    ax.set_ylabel("runs")
    ax.set_title(title)
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
