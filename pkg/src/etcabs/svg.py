"""Minimal self-contained SVG charts for the abstraction artifacts."""

import math
from xml.sax.saxutils import escape

W, H = 640, 400
PAD = 50


def _fmt(v):
    return f"{v:.2f}"


class Chart:
    def __init__(self, title, xlabel, ylabel, xlim, ylim):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.items = []

    def sx(self, x):
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2 * PAD)

    def sy(self, y):
        return H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2 * PAD)

    def polyline(self, xs, ys, color="black", dash=False, cls="line"):
        pts = " ".join(f"{_fmt(self.sx(x))},{_fmt(self.sy(y))}" for x, y in zip(xs, ys))
        extra = ' stroke-dasharray="6,4"' if dash else ""
        self.items.append(f'<polyline class="{cls}" points="{pts}" fill="none" '
                          f'stroke="{color}" stroke-width="1.5"{extra}/>')

    def points(self, xs, ys, color="black", r=2.0, cls="pt"):
        for x, y in zip(xs, ys):
            self.items.append(f'<circle class="{cls}" cx="{_fmt(self.sx(x))}" '
                              f'cy="{_fmt(self.sy(y))}" r="{r}" fill="{color}"/>')

    def xticks(self, values, labels=None):
        labels = labels or [str(v) for v in values]
        y = H - PAD
        for v, lab in zip(values, labels):
            x = _fmt(self.sx(v))
            self.items.append(f'<line x1="{x}" y1="{y}" x2="{x}" y2="{y + 4}" stroke="black"/>')
            self.items.append(f'<text class="xtick" x="{x}" y="{y + 16}" font-size="9" '
                              f'text-anchor="middle">{escape(lab)}</text>')

    def yticks(self, count=5):
        for k in range(count + 1):
            v = self.y0 + (self.y1 - self.y0) * k / count
            y = _fmt(self.sy(v))
            self.items.append(f'<text x="{PAD - 6}" y="{y}" font-size="9" '
                              f'text-anchor="end">{v:.3g}</text>')

    def render(self):
        head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
                f'viewBox="0 0 {W} {H}">',
                '<rect width="100%" height="100%" fill="white"/>',
                f'<text x="{W / 2}" y="20" font-size="13" text-anchor="middle">'
                f'{escape(self.title)}</text>',
                f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
                'fill="none" stroke="black"/>',
                f'<text x="{W / 2}" y="{H - 10}" font-size="11" text-anchor="middle">'
                f'{escape(self.xlabel)}</text>',
                f'<text x="14" y="{H / 2}" font-size="11" text-anchor="middle" '
                f'transform="rotate(-90 14 {H / 2})">{escape(self.ylabel)}</text>']
        return "\n".join(head + self.items + ["</svg>", ""])


def bounds_chart(bounds):
    idx = [b.index for b in bounds]
    lo = [b.tau_lo for b in bounds]
    hi = [b.tau_hi for b in bounds]
    c = Chart("Regional inter-sample time bounds", "region", "time [s]",
              (min(idx) - 0.5, max(idx) + 0.5), (0.0, max(hi) * 1.1))
    c.polyline(idx, lo, "black", cls="lower")
    c.polyline(idx, hi, "black", dash=True, cls="upper")
    step = max(1, len(idx) // 20)
    c.xticks(idx[::step])
    c.yticks()
    return c.render()


def polar_chart(part, bounds):
    """Bounds as distances from the origin along each sector's bisector (n = 2)."""
    R = max(b.tau_hi for b in bounds) * 1.1
    c = Chart("Bounds in the state plane", "x1", "x2", (-R, R), (-R, R))
    for marker, attr, color in (("lower", "tau_lo", "black"), ("upper", "tau_hi", "gray")):
        xs, ys = [], []
        for b in bounds:
            lo, hi = part.region(b.index).angular_box[0]
            th = 0.5 * (lo + hi)
            v = getattr(b, attr)
            xs.append(v * math.cos(th))
            ys.append(v * math.sin(th))
        c.points(xs, ys, color, r=2.5, cls=marker)
        c.polyline(xs + xs[:1], ys + ys[:1], color, dash=(marker == "upper"), cls=marker)
    c.yticks()
    return c.render()


def scatter_chart(bounds, samples):
    """``samples``: (region, tau) pairs from simulated traces."""
    idx = [b.index for b in bounds]
    top = max([b.tau_hi for b in bounds] + [t for _, t in samples]) * 1.1
    c = Chart("Simulated inter-sample times vs certified bounds", "region",
              "time [s]", (min(idx) - 0.5, max(idx) + 0.5), (0.0, top))
    c.polyline(idx, [b.tau_lo for b in bounds], cls="lower")
    c.polyline(idx, [b.tau_hi for b in bounds], dash=True, cls="upper")
    c.points([s for s, _ in samples], [t for _, t in samples], "red", r=1.5)
    step = max(1, len(idx) // 20)
    c.xticks(idx[::step])
    c.yticks()
    return c.render()


def transition_chart(q, edges):
    c = Chart("Transitions (source i, target j)", "source region", "target region",
              (0.5, q + 0.5), (0.5, q + 0.5))
    c.points([s for s, _ in edges], [t for _, t in edges], "black", r=2.5, cls="edge")
    step = max(1, q // 20)
    c.xticks(list(range(1, q + 1, step)))
    return c.render()
