"""Native SVG emission of the regret and violation panels.

Each panel shows the per-episode mean curve of both algorithms with a
shaded 95% confidence band; no plotting library is involved, so the
output is a standalone vector-graphic document.
"""

from pathlib import Path

import numpy as np

from .harness import AGG_COLUMNS, ALGO_BASELINE, ALGO_LEARNER, read_csv

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 55
COLORS = {ALGO_LEARNER: "#1f77b4", ALGO_BASELINE: "#ff7f0e"}
LABELS = {ALGO_LEARNER: "PD-POWERS", ALGO_BASELINE: "random policy"}


def _nice_ticks(lo: float, hi: float, target: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = np.ceil(lo / step) * step
    return np.arange(first, hi + 0.5 * step, step)


class _Panel:
    def __init__(self, x_range, y_range):
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        self.parts = []

    def x(self, v):
        span = max(self.x_hi - self.x_lo, 1e-300)
        return MARGIN_L + (v - self.x_lo) / span * (WIDTH - MARGIN_L - MARGIN_R)

    def y(self, v):
        span = max(self.y_hi - self.y_lo, 1e-300)
        return HEIGHT - MARGIN_B - (v - self.y_lo) / span * (HEIGHT - MARGIN_T - MARGIN_B)

    def polyline(self, xs, ys, color, width=1.8):
        pts = " ".join(f"{self.x(a):.2f},{self.y(b):.2f}" for a, b in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"/>')

    def band(self, xs, lo, hi, color):
        fwd = [f"{self.x(a):.2f},{self.y(b):.2f}" for a, b in zip(xs, hi)]
        back = [f"{self.x(a):.2f},{self.y(b):.2f}"
                for a, b in zip(xs[::-1], lo[::-1])]
        self.parts.append(
            f'<polygon points="{" ".join(fwd + back)}" fill="{color}" '
            f'fill-opacity="0.2" stroke="none"/>')

    def text(self, x, y, s, anchor="middle", size=13, rotate=None):
        extra = f' transform="rotate(-90 {x} {y})"' if rotate else ""
        self.parts.append(
            f'<text x="{x}" y="{y}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}"{extra}>{s}</text>')

    def axes(self, x_label, y_label, title):
        x0, x1 = MARGIN_L, WIDTH - MARGIN_R
        y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
        self.parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            'fill="none" stroke="#444"/>')
        for t in _nice_ticks(self.x_lo, self.x_hi):
            px = self.x(t)
            self.parts.append(
                f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" '
                'stroke="#444"/>')
            self.text(px, y0 + 20, f"{t:g}")
        for t in _nice_ticks(self.y_lo, self.y_hi):
            py = self.y(t)
            self.parts.append(
                f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" '
                'stroke="#444"/>')
            self.text(x0 - 9, py + 4, f"{t:g}", anchor="end", size=11)
        self.text((x0 + x1) / 2, HEIGHT - 12, x_label)
        self.text(18, (y0 + y1) / 2, y_label, rotate=True)
        self.text((x0 + x1) / 2, 18, title, size=15)

    def legend(self):
        lx, ly = MARGIN_L + 14, MARGIN_T + 16
        for i, algo in enumerate((ALGO_LEARNER, ALGO_BASELINE)):
            yy = ly + 20 * i
            self.parts.append(
                f'<line x1="{lx}" y1="{yy}" x2="{lx + 26}" y2="{yy}" '
                f'stroke="{COLORS[algo]}" stroke-width="2.5"/>')
            self.text(lx + 32, yy + 4, LABELS[algo], anchor="start", size=12)

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
                f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n'
                f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
                f"{body}\n</svg>\n")


def _load_aggregate(path: Path):
    header, data = read_csv(path)
    if tuple(header) != AGG_COLUMNS:
        raise ValueError(f"unexpected aggregate header in {path}")
    if len(data[0]) == 0:
        raise ValueError(f"aggregate {path} has no rows")
    return dict(zip(header, data))


def emit_plot(in_dir, out_dir):
    """Render regret.svg and violation.svg from the aggregate CSVs."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    aggs = {algo: _load_aggregate(in_dir / f"aggregate_{algo}.csv")
            for algo in (ALGO_LEARNER, ALGO_BASELINE)}
    k0 = aggs[ALGO_LEARNER]["k"]
    if any(len(a["k"]) != len(k0) or np.any(a["k"] != k0)
           for a in aggs.values()):
        raise ValueError("aggregate CSVs do not share an episode axis")

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, title in (("regret", "Cumulative regret"),
                          ("violation", "Cumulative constraint violation")):
        y_hi = max(float((a[f"{metric}_mean"] + a[f"{metric}_ci95"]).max())
                   for a in aggs.values())
        y_lo = min(0.0, min(float((a[f"{metric}_mean"] - a[f"{metric}_ci95"]).min())
                            for a in aggs.values()))
        panel = _Panel((float(k0[0]), float(k0[-1])), (y_lo, y_hi))
        panel.axes("episode k", title, title + " vs. episodes")
        for algo, agg in aggs.items():
            mean = agg[f"{metric}_mean"]
            ci = agg[f"{metric}_ci95"]
            panel.band(k0, mean - ci, mean + ci, COLORS[algo])
            panel.polyline(k0, mean, COLORS[algo])
        panel.legend()
        path = out_dir / f"{metric}.svg"
        path.write_text(panel.render())
        written.append(path)
    return written
