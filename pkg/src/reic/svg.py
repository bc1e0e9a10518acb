"""Tiny static SVG plotter: line plots and grouped bar histograms.

Emits plain SVG 1.1 with no external assets, deterministic down to the
byte for identical inputs.
"""
from __future__ import annotations

W, H = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 55
COLORS = ("#1f6fb2", "#d1495b", "#3f8f4a", "#8a5fb0", "#c78a2d", "#4a4a4a")


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{_esc(title)}</text>',
    ]


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _axes(parts, xlabel, ylabel, xticks, yticks):
    x0, y0 = MARGIN_L, H - MARGIN_B
    x1, y1 = W - MARGIN_R, MARGIN_T
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for px, label in xticks:
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{px:.1f}" y="{y0 + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{label}</text>')
    for py, label in yticks:
        parts.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{label}</text>')
    parts.append(
        f'<text x="{(x0 + x1) / 2:.1f}" y="{H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_esc(xlabel)}</text>')
    parts.append(
        f'<text x="18" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{_esc(ylabel)}</text>')


def _spans(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def line_plot(series, title: str, xlabel: str, ylabel: str) -> str:
    """series: list of (label, xs, ys) with equal-length numeric sequences."""
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        raise ValueError("line_plot: no data")
    xlo, xhi = _spans(xs_all)
    ylo, yhi = _spans(ys_all)
    x0, y0 = MARGIN_L, H - MARGIN_B
    x1, y1 = W - MARGIN_R, MARGIN_T

    def px(x):
        return x0 + (x - xlo) / (xhi - xlo) * (x1 - x0)

    def py(y):
        return y0 - (y - ylo) / (yhi - ylo) * (y0 - y1)

    parts = _header(title)
    xticks = [(px(xlo + (xhi - xlo) * k / 4), f"{xlo + (xhi - xlo) * k / 4:.4g}") for k in range(5)]
    yticks = [(py(ylo + (yhi - ylo) * k / 4), f"{ylo + (yhi - ylo) * k / 4:.4g}") for k in range(5)]
    _axes(parts, xlabel, ylabel, xticks, yticks)
    for idx, (label, xs, ys) in enumerate(series):
        color = COLORS[idx % len(COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        ly = MARGIN_T + 16 * idx
        parts.append(f'<line x1="{x1 - 120}" y1="{ly}" x2="{x1 - 98}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x1 - 92}" y="{ly + 4}" font-family="sans-serif" '
                     f'font-size="11">{_esc(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_hist(groups, title: str, xlabel: str, ylabel: str) -> str:
    """groups: list of (label, {bin value -> count}); bars side by side per bin."""
    bins = sorted({b for _, hist in groups for b in hist})
    if not bins:
        raise ValueError("bar_hist: no data")
    max_count = max(max(hist.values()) for _, hist in groups if hist)
    x0, y0 = MARGIN_L, H - MARGIN_B
    x1, y1 = W - MARGIN_R, MARGIN_T
    slot = (x1 - x0) / len(bins)
    bar_w = slot * 0.8 / max(1, len(groups))

    def py(count):
        return y0 - count / max_count * (y0 - y1)

    parts = _header(title)
    xticks = [(x0 + (i + 0.5) * slot, str(b)) for i, b in enumerate(bins)]
    yticks = [(py(max_count * k / 4), f"{max_count * k / 4:.4g}") for k in range(5)]
    _axes(parts, xlabel, ylabel, xticks, yticks)
    for gi, (label, hist) in enumerate(groups):
        color = COLORS[gi % len(COLORS)]
        for bi, b in enumerate(bins):
            count = hist.get(b, 0)
            bx = x0 + bi * slot + slot * 0.1 + gi * bar_w
            parts.append(
                f'<rect x="{bx:.2f}" y="{py(count):.2f}" width="{bar_w:.2f}" '
                f'height="{y0 - py(count):.2f}" fill="{color}"/>')
        ly = MARGIN_T + 16 * gi
        parts.append(f'<rect x="{x1 - 120}" y="{ly - 8}" width="20" height="10" fill="{color}"/>')
        parts.append(f'<text x="{x1 - 92}" y="{ly + 2}" font-family="sans-serif" '
                     f'font-size="11">{_esc(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
