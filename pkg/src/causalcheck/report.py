"""Plot and report emission: SVG histograms and the consolidated index.

The histogram mirrors the usual check display: 30 bins of the reference
draws in gray, the realized draws overlaid translucent (or as a vertical
marker when the realized side is a point mass).  All output is plain string
building, so bytes are identical across runs with identical inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from causalcheck.ppc import CheckResult, check_result_from_json

__all__ = ["histogram_svg", "write_summary", "render_index_html"]

BINS = 30
WIDTH, HEIGHT = 480, 300
MARGIN_LEFT, MARGIN_BOTTOM, MARGIN_TOP = 45, 35, 15
REFERENCE_COLOR = "#9aa5b1"
REALIZED_COLOR = "#c0392b"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def histogram_svg(result: CheckResult, title: str = "") -> str:
    t_rep = np.asarray(result.t_rep)
    t_obs = np.asarray(result.t_obs)
    point_mass = bool(np.all(t_obs == t_obs[0]))
    lo = float(min(t_rep.min(), t_obs.min()))
    hi = float(max(t_rep.max(), t_obs.max()))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    lo -= 0.02 * span
    hi += 0.02 * span
    edges = np.linspace(lo, hi, BINS + 1)
    rep_counts, _ = np.histogram(t_rep, bins=edges)
    obs_counts, _ = np.histogram(t_obs, bins=edges)
    peak = max(int(rep_counts.max()), int(obs_counts.max()), 1)

    plot_w = WIDTH - MARGIN_LEFT - 10
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    x0 = MARGIN_LEFT
    y0 = HEIGHT - MARGIN_BOTTOM

    def x_of(v: float) -> float:
        return x0 + (v - lo) / (hi - lo) * plot_w

    def bar_height(count: int) -> float:
        return count / peak * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH / 2}" y="{MARGIN_TOP}" text-anchor="middle" font-size="13">{title}</text>'
        )
    for i in range(BINS):
        h = bar_height(int(rep_counts[i]))
        if h <= 0:
            continue
        x = x_of(edges[i])
        w = x_of(edges[i + 1]) - x
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y0 - h)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{REFERENCE_COLOR}" stroke="white" stroke-width="0.5"/>'
        )
    if point_mass:
        x = x_of(float(t_obs[0]))
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(y0 - plot_h)}" x2="{_fmt(x)}" y2="{_fmt(y0)}" '
            f'stroke="{REALIZED_COLOR}" stroke-width="2.5"/>'
        )
    else:
        for i in range(BINS):
            h = bar_height(int(obs_counts[i]))
            if h <= 0:
                continue
            x = x_of(edges[i])
            w = x_of(edges[i + 1]) - x
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y0 - h)}" width="{_fmt(w)}" height="{_fmt(h)}" '
                f'fill="{REALIZED_COLOR}" fill-opacity="0.45"/>'
            )
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="#333" stroke-width="1"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * (hi - lo)
        x = x_of(v)
        parts.append(
            f'<text x="{_fmt(x)}" y="{y0 + 16}" text-anchor="middle" fill="#333">{v:.4g}</text>'
        )
    parts.append(
        f'<text x="{x0 + plot_w}" y="{MARGIN_TOP + 12}" text-anchor="end" fill="{REALIZED_COLOR}">'
        f"tail probability {result.tail_prob:.3f} ({result.verdict})</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Consolidated report over a results directory
# ---------------------------------------------------------------------------


def _collect(results_dir: Path) -> list[tuple[str, CheckResult]]:
    paths = sorted(results_dir.glob("check_*.json"))
    if not paths:
        raise FileNotFoundError(f"no check result JSON files found in {results_dir}")
    rows = []
    for path in paths:
        try:
            rows.append((path.stem, check_result_from_json(path)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"malformed check result {path}: {exc}") from exc
    return rows


def write_summary(results_dir: str | Path, out_dir: str | Path | None = None) -> str:
    """Merge check results into summary.json + index.html; returns overall verdict."""
    results_dir = Path(results_dir)
    out_dir = results_dir if out_dir is None else Path(out_dir)
    rows = _collect(results_dir)
    overall = "pass"
    if any(r.verdict == "fail" for _, r in rows):
        overall = "fail"
    elif any(r.verdict == "warn" for _, r in rows):
        overall = "warn"
    summary = {
        "overall": overall,
        "checks": [
            {
                "name": name,
                "kind": r.metadata.get("kind"),
                "realization_mode": r.metadata.get("realization_mode"),
                "S": r.S,
                "tail_prob": r.tail_prob,
                "verdict": r.verdict,
                "warnings": list(r.metadata.get("warnings", [])),
            }
            for name, r in rows
        ],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    (out_dir / "index.html").write_text(render_index_html(summary))
    return overall


def render_index_html(summary: dict) -> str:
    rows = []
    for check in summary["checks"]:
        mode = check["realization_mode"] or "-"
        svg_name = f"{check['name']}.svg"
        rows.append(
            "<tr>"
            f"<td>{check['kind']}</td><td>{mode}</td><td>{check['S']}</td>"
            f"<td>{check['tail_prob']:.4f}</td>"
            f"<td class=\"{check['verdict']}\">{check['verdict']}</td>"
            f'<td><a href="{svg_name}">{svg_name}</a></td>'
            "</tr>"
        )
    body = "\n".join(rows)
    return f"""<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>causal model checks</title>
<style>
body {{ font-family: sans-serif; margin: 2em; }}
table {{ border-collapse: collapse; }}
td, th {{ border: 1px solid #999; padding: 4px 10px; }}
td.pass {{ background: #d9ead3; }}
td.warn {{ background: #fff2cc; }}
td.fail {{ background: #f4cccc; }}
</style></head>
<body>
<h1>Causal model criticism report</h1>
<p>Overall verdict: <strong>{summary['overall']}</strong></p>
<table>
<tr><th>discrepancy</th><th>realization</th><th>S</th><th>tail probability</th><th>verdict</th><th>plot</th></tr>
{body}
</table>
</body></html>
"""
