"""Minimal deterministic SVG line plots."""
import math

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
W, H, PAD = 640, 400, 56


def _fmt(v):
    return f"{v:.2f}"


def line_plot(path, series, title="", xlabel="", ylabel="", logy=False):
    """Write ``series`` (list of ``(label, xs, ys)``) as an SVG polyline chart."""
    pts = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if y is None or not math.isfinite(y) or (logy and y <= 0):
                continue
            pts.append((x, math.log10(y) if logy else y))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)

    def sy(y):
        return H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {H / 2})">{ylabel}{" (log10)" if logy else ""}</text>',
           f'<text x="{PAD}" y="{H - PAD + 16}" font-size="10">{x0:.4g}</text>',
           f'<text x="{W - PAD}" y="{H - PAD + 16}" text-anchor="end" font-size="10">{x1:.4g}</text>',
           f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end" font-size="10">{y0:.4g}</text>',
           f'<text x="{PAD - 4}" y="{PAD + 4}" text-anchor="end" font-size="10">{y1:.4g}</text>']
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = []
        for x, y in zip(xs, ys):
            if y is None or not math.isfinite(y) or (logy and y <= 0):
                continue
            coords.append(f"{_fmt(sx(x))},{_fmt(sy(math.log10(y) if logy else y))}")
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(coords)}"/>')
        out.append(f'<text x="{W - PAD - 4}" y="{PAD + 14 * (i + 1)}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
