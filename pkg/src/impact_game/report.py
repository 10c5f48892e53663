"""CSV, JSON and SVG output for scenario results."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .scenarios import ScenarioResult, dump_config, scenario_to_dict

CSV_HEADER = "t,trader,mean,median,q1,q3,whisker_lo,whisker_hi,total_volume"
FORMATS = ("csv", "json", "svg")


@dataclass(frozen=True)
class EmitResult:
    config: Path
    files: tuple


def _fmt(x) -> str:
    return repr(float(x))


def _label(point) -> str:
    return ", ".join(f"{k}={v:g}" for k, v in point.items()) or "base"


def to_csv(summary) -> str:
    rows = [CSV_HEADER]
    for t in range(summary.T):
        for i in range(2):
            stats = (
                summary.mean[t, i],
                summary.median[t, i],
                summary.q1[t, i],
                summary.q3[t, i],
                summary.whisker_lo[t, i],
                summary.whisker_hi[t, i],
                summary.total_volume[t],
            )
            rows.append(",".join([str(t + 1), str(i + 1)] + [_fmt(v) for v in stats]))
    return "\n".join(rows) + "\n"


def to_json(result: ScenarioResult, seed) -> str:
    s = result.summary
    doc = {
        "version": __version__,
        "seed": seed,
        "point": result.point,
        "parameters": scenario_to_dict(result.scenario),
        "policy": result.solution.policy_table().tolist(),
        "summary": {
            "mean": s.mean.tolist(),
            "median": s.median.tolist(),
            "q1": s.q1.tolist(),
            "q3": s.q3.tolist(),
            "whisker_lo": s.whisker_lo.tolist(),
            "whisker_hi": s.whisker_hi.tolist(),
            "total_volume": s.total_volume.tolist(),
            "wealth_mean": s.wealth_mean.tolist(),
            "wealth_std": s.wealth_std.tolist(),
            "num_paths": s.num_paths,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def to_svg(result: ScenarioResult, title: str) -> str:
    """Box-and-whisker glyphs per period and a line through the means, one panel per trader."""
    s = result.summary
    T = s.T
    pw, ph, pad = 360, 240, 40
    width, height = 2 * pw + 3 * pad, ph + 3 * pad
    lo = float(min(s.whisker_lo.min(), s.mean.min(), 0.0))
    hi = float(max(s.whisker_hi.max(), s.mean.max(), 0.0))
    if hi == lo:
        hi = lo + 1.0
    colors = ("#1f77b4", "#d62728")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<text x="{pad}" y="{pad // 2 + 4}" font-size="13">{title}</text>',
    ]
    for i in range(2):
        x0 = pad + i * (pw + pad)
        y0 = 2 * pad

        def X(t):
            return x0 + (t - 0.5) * pw / T

        def Y(v):
            return y0 + ph * (hi - v) / (hi - lo)

        out.append(f'<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>')
        out.append(f'<line x1="{x0}" y1="{Y(0):.2f}" x2="{x0 + pw}" y2="{Y(0):.2f}" stroke="#ccc"/>')
        out.append(f'<text x="{x0}" y="{y0 - 6}">trader {i + 1}</text>')
        out.append(f'<text x="{x0 - 4}" y="{y0 + 4}" text-anchor="end">{hi:.3g}</text>')
        out.append(f'<text x="{x0 - 4}" y="{y0 + ph}" text-anchor="end">{lo:.3g}</text>')
        half = 0.25 * pw / T
        for t in range(1, T + 1):
            k = t - 1
            cx = X(t)
            out.append(
                f'<line x1="{cx:.2f}" y1="{Y(s.whisker_lo[k, i]):.2f}" x2="{cx:.2f}" y2="{Y(s.whisker_hi[k, i]):.2f}" stroke="#555"/>'
            )
            top, bot = Y(s.q3[k, i]), Y(s.q1[k, i])
            out.append(
                f'<rect x="{cx - half:.2f}" y="{top:.2f}" width="{2 * half:.2f}" height="{max(bot - top, 0.5):.2f}" fill="#eee" stroke="#555"/>'
            )
            ym = Y(s.median[k, i])
            out.append(f'<line x1="{cx - half:.2f}" y1="{ym:.2f}" x2="{cx + half:.2f}" y2="{ym:.2f}" stroke="#000" stroke-width="2"/>')
            out.append(f'<text x="{cx:.2f}" y="{y0 + ph + 14}" text-anchor="middle">{t}</text>')
        pts = " ".join(f"{X(t):.2f},{Y(s.mean[t - 1, i]):.2f}" for t in range(1, T + 1))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colors[i]}" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit(results, fmt: str = "csv", out_dir=".", scenario=None) -> EmitResult:
    """Write one file per grid point in ``fmt`` plus ``<name>.config.json``.

    ``scenario`` is the swept scenario the results came from; it is what the
    config file records, so that loading it reproduces the run.
    """
    results = list(results)
    if not results:
        raise ValueError("nothing to emit")
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = scenario if scenario is not None else results[0].scenario
    name = base.name
    files = []
    for k, res in enumerate(results):
        stem = out / f"{name}_p{k:02d}"
        if fmt == "csv":
            path = stem.with_suffix(".csv")
            path.write_text(to_csv(res.summary))
        elif fmt == "json":
            path = stem.with_suffix(".json")
            path.write_text(to_json(res, base.simulation.seed))
        else:
            path = stem.with_suffix(".svg")
            path.write_text(to_svg(res, f"{name}: {_label(res.point)}"))
        files.append(path)
    config = dump_config(base, out / f"{name}.config.json")
    return EmitResult(config=config, files=tuple(files))


def coefficient_table(solution) -> str:
    """Plain-text policy and value tables, one block per trader."""
    lines = []
    pol = solution.policy_table()
    val = solution.value_table()
    names = ("G1", "G2", "H1", "H2", "H3", "J1", "J2", "J3", "J4", "L1", "L2", "L3", "L4", "L5", "Z")
    with np.printoptions(precision=6):
        for i in range(2):
            lines.append(f"trader {i + 1} policy  q = a + b*Q_own + c*Q_other + d*R + e*I_prev")
            lines.append("   t" + "".join(f"{c:>15}" for c in "abcde"))
            for t in range(solution.T):
                lines.append(f"{t + 1:4d}" + "".join(f"{v:15.6g}" for v in pol[t, i]))
            lines.append(f"trader {i + 1} value coefficients")
            lines.append("   t" + "".join(f"{c:>13}" for c in names))
            for t in range(solution.T):
                lines.append(f"{t + 1:4d}" + "".join(f"{v:13.5g}" for v in val[t, i]))
            lines.append("")
    return "\n".join(lines)
