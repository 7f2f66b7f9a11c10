"""Running seeds, aggregating incumbent traces, CSV and SVG reports."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..benchmarks import make_objective
from ..errors import ObjectiveEvaluationError
from ..optimizer import RUNNERS, History
from .config import ExperimentSpec

log = logging.getLogger(__name__)

AGGREGATE_HEADER = ("iteration", "median", "q25", "q75")


def fmt(v: float) -> str:
    return repr(float(v))


def _run_one(spec: ExperimentSpec, seed: int) -> str:
    objective = make_objective(spec.objective)
    config = spec.run_config(seed)
    try:
        hist = RUNNERS[spec.method](objective, config)
    except ObjectiveEvaluationError as exc:
        log.error("seed %d aborted: %s", seed, exc)
        hist = exc.history
    return hist.to_jsonl(include_x=False)


def trace_path(out: Path, seed: int) -> Path:
    return out / "traces" / f"seed-{seed}.jsonl"


def read_incumbents(path) -> np.ndarray:
    return History.from_jsonl(Path(path).read_text()).incumbent_trace()


def aggregate_incumbents(traces) -> list[tuple]:
    """(iteration, median, q25, q75) across seeds, truncated to the shortest trace."""
    traces = [np.asarray(t, dtype=float) for t in traces]
    n = min(len(t) for t in traces)
    M = np.vstack([t[:n] for t in traces])
    med = np.median(M, axis=0)
    q25, q75 = np.percentile(M, [25, 75], axis=0)
    return [(i + 1, med[i], q25[i], q75[i]) for i in range(n)]


def aggregate_csv(rows, extra: dict | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = extra or {}
    w.writerow(list(extra) + list(AGGREGATE_HEADER))
    for it, med, lo, hi in rows:
        w.writerow(list(extra.values()) + [it, fmt(med), fmt(lo), fmt(hi)])
    return buf.getvalue()


def read_aggregate(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in AGGREGATE_HEADER}


def plot_svg(series: dict, path, title: str = "", ylabel: str = "best value") -> None:
    """Median lines with interquartile bands; series maps label -> aggregate dict."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "rpmbo", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, agg in series.items():
            ax.plot(agg["iteration"], agg["median"], label=label)
            ax.fill_between(agg["iteration"], agg["q25"], agg["q75"], alpha=0.25)
        ax.set_xlabel("evaluations")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run every seed; write traces, aggregate.csv, convergence.svg and spec.json."""
    make_objective(spec.objective)  # fail fast on a bad id
    out = Path(spec.out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    if spec.workers > 1 and len(spec.seeds) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            texts = list(pool.map(_run_one, [spec] * len(spec.seeds), spec.seeds))
    else:
        texts = [_run_one(spec, s) for s in spec.seeds]
    traces = []
    for seed, text in zip(spec.seeds, texts):
        trace_path(out, seed).write_text(text)
        traces.append(History.from_jsonl(text).incumbent_trace())
    rows = aggregate_incumbents(traces)
    (out / "aggregate.csv").write_text(aggregate_csv(rows))
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    plot_svg({spec.method: read_aggregate(out / "aggregate.csv")}, out / "convergence.svg", title=spec.objective)
    return {"out": out, "rows": rows, "final": [float(t[-1]) for t in traces]}


def m_sweep(spec: ExperimentSpec, ms) -> dict:
    """One experiment per m; merged CSV with a leading m column and one plot."""
    ms = [int(m) for m in ms]
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    merged = []
    series = {}
    finals = {}
    for m in ms:
        sub = replace(spec, out=str(out / f"m{m}"), run={**spec.run, "m": m})
        res = run_experiment(sub)
        text = aggregate_csv(res["rows"], {"m": m})
        merged.append(text if not merged else text.split("\n", 1)[1])
        series[f"m={m}"] = read_aggregate(out / f"m{m}" / "aggregate.csv")
        finals[m] = float(np.median(res["final"]))
    (out / "msweep.csv").write_text("".join(merged))
    plot_svg(series, out / "msweep.svg", title=spec.objective)
    return {"out": out, "final_medians": finals}


def final_incumbents(trace_dir) -> dict:
    """seed -> final incumbent for every seed-*.jsonl under trace_dir."""
    trace_dir = Path(trace_dir)
    if (trace_dir / "traces").is_dir():
        trace_dir = trace_dir / "traces"
    out = {}
    for p in sorted(trace_dir.glob("seed-*.jsonl")):
        out[int(p.stem.split("-", 1)[1])] = float(read_incumbents(p)[-1])
    return out
