"""CSV traces and hand-written SVG convergence plots."""

import csv
import math
from xml.sax.saxutils import escape

CSV_COLUMNS = ("t", "f", "gnorm", "delta", "inner_repeats", "step_norm", "grad_evals", "hvp_equiv", "wall_ns")
GAP_FLOOR = 1e-16
WIDTH, HEIGHT = 800, 600
_MARGIN = {"left": 80, "right": 190, "top": 50, "bottom": 60}
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
            "#bcbd22", "#17becf")


def _cell(v):
    # repr gives the shortest decimal that round-trips
    return repr(float(v)) if isinstance(v, float) else str(int(v))


def emit_trace_csv(trace, path):
    """Write one row per record; floats in shortest round-trip form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(CSV_COLUMNS)
        for r in trace.records:
            w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])


def read_trace_csv(path):
    """Read a trace CSV back into a list of dicts with typed values."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    ints = {"t", "inner_repeats", "grad_evals", "hvp_equiv", "wall_ns"}
    return [{k: int(v) if k in ints else float(v) for k, v in row.items()} for row in rows]


def _fmt(v):
    return f"{v:.2f}"


def _nice_ticks(lo, hi, n=6):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    k = 0
    while start + k * step <= hi + 1e-9 * step:
        ticks.append(start + k * step)
        k += 1
    return ticks


def _tick_label(v):
    return f"{v:g}" if abs(v) < 1e6 else f"{v:.1e}"


def emit_plot_svg(traces, axis, path, fstar, title=None):
    """Plot ``f - fstar`` (floored at 1e-16, log scale) against ``axis``.

    ``traces`` maps a method name to its :class:`SolverTrace` (insertion order
    is legend order); ``axis`` is ``"iteration"`` or ``"hvp_equiv"``.
    """
    if axis not in ("iteration", "hvp_equiv"):
        raise ValueError(f"unknown axis {axis!r}")
    series = []
    for name, tr in traces.items():
        xs = [r.t if axis == "iteration" else r.hvp_equiv for r in tr.records]
        ys = [math.log10(max(r.f - fstar, GAP_FLOOR)) for r in tr.records]
        series.append((name, xs, ys))
    all_x = [x for _, xs, _ in series for x in xs] or [0]
    all_y = [y for _, _, ys in series for y in ys] or [0.0]
    x_lo, x_hi = min(all_x), max(max(all_x), min(all_x) + 1)
    y_lo, y_hi = math.floor(min(all_y)), math.ceil(max(all_y))
    if y_hi == y_lo:
        y_hi += 1
    L, R, T, B = _MARGIN["left"], WIDTH - _MARGIN["right"], _MARGIN["top"], HEIGHT - _MARGIN["bottom"]

    def px(x):
        return L + (x - x_lo) / (x_hi - x_lo) * (R - L)

    def py(y):
        return B - (y - y_lo) / (y_hi - y_lo) * (B - T)

    xlabel = "iteration" if axis == "iteration" else "HVP-equivalent oracle calls"
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{_fmt((L + R) / 2)}" y="30" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title or "gap proxy vs " + xlabel)}</text>',
        f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>',
    ]
    step = max(1, math.ceil((y_hi - y_lo) / 10))
    for e in range(y_lo, y_hi + 1, step):
        y = _fmt(py(e))
        out.append(f'<line x1="{L}" y1="{y}" x2="{R}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{L - 6}" y="{y}" text-anchor="end" dominant-baseline="middle" '
                   f'font-family="sans-serif" font-size="11">1e{e}</text>')
    for xt in _nice_ticks(x_lo, x_hi):
        x = _fmt(px(xt))
        out.append(f'<line x1="{x}" y1="{B}" x2="{x}" y2="{B + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{B + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{_tick_label(xt)}</text>')
    out.append(f'<text x="{_fmt((L + R) / 2)}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{_fmt((T + B) / 2)}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 20 {_fmt((T + B) / 2)})">gap proxy</text>')
    for i, (name, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{pts}"><title>{escape(name)}</title></polyline>')
        ly = T + 10 + 20 * i
        out.append(f'<line x1="{R + 15}" y1="{ly}" x2="{R + 40}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{R + 46}" y="{ly}" dominant-baseline="middle" font-family="sans-serif" '
                   f'font-size="12">{escape(name)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
