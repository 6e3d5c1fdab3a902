"""Minimal deterministic SVG charts (histogram, sweep curve, trade-off)."""
from __future__ import annotations

import math
from collections import OrderedDict
from typing import Optional, Sequence

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 70, 30, 50


def _num(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


class Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, y2label: Optional[str] = None):
        self.parts: list[str] = []
        self.title, self.xlabel, self.ylabel, self.y2label = title, xlabel, ylabel, y2label
        self.xr = (0.0, 1.0)
        self.yr = (0.0, 1.0)
        self.y2r = (0.0, 1.0)

    def set_ranges(self, xr, yr, y2r=None):
        def widen(r):
            lo, hi = float(r[0]), float(r[1])
            if not (math.isfinite(lo) and math.isfinite(hi)):
                return (0.0, 1.0)
            if hi <= lo:
                return (lo - 0.5, hi + 0.5)
            return (lo, hi)
        self.xr, self.yr = widen(xr), widen(yr)
        if y2r is not None:
            self.y2r = widen(y2r)

    def px(self, x: float) -> float:
        lo, hi = self.xr
        return LEFT + (x - lo) / (hi - lo) * (W - LEFT - RIGHT)

    def py(self, y: float, axis: int = 1) -> float:
        lo, hi = self.yr if axis == 1 else self.y2r
        return H - BOTTOM - (y - lo) / (hi - lo) * (H - TOP - BOTTOM)

    def rect(self, x0, x1, y, color="#4a78b5"):
        top, base = self.py(y), self.py(max(self.yr[0], 0.0))
        self.parts.append(f'<rect x="{_num(self.px(x0))}" y="{_num(min(top, base))}" '
                          f'width="{_num(max(self.px(x1) - self.px(x0), 0.0))}" '
                          f'height="{_num(abs(base - top))}" fill="{color}" fill-opacity="0.6"/>')

    def polyline(self, xs, ys, color="#c0392b", axis=1, width=1.5, dash: Optional[str] = None):
        pts = [(self.px(x), self.py(y, axis)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y)]
        if len(pts) < 2:
            return
        d = " ".join(f"{_num(a)},{_num(b)}" for a, b in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline points="{d}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{extra}/>')

    def band(self, xs, lo, hi, color="#4a78b5"):
        pts = [(x, a, b) for x, a, b in zip(xs, lo, hi) if all(map(math.isfinite, (x, a, b)))]
        if len(pts) < 2:
            return
        upper = [f"{_num(self.px(x))},{_num(self.py(b))}" for x, _, b in pts]
        lower = [f"{_num(self.px(x))},{_num(self.py(a))}" for x, a, _ in reversed(pts)]
        self.parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" '
                          f'fill-opacity="0.25" stroke="none"/>')

    def marks(self, xs, ys, color="#4a78b5", axis=1):
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                self.parts.append(f'<circle cx="{_num(self.px(x))}" cy="{_num(self.py(y, axis))}" '
                                  f'r="2.5" fill="{color}"/>')

    def cross(self, x, y, color="#c0392b", size=6):
        cx, cy = self.px(x), self.py(y)
        self.parts.append(f'<path d="M{_num(cx - size)},{_num(cy - size)} L{_num(cx + size)},{_num(cy + size)} '
                          f'M{_num(cx - size)},{_num(cy + size)} L{_num(cx + size)},{_num(cy - size)}" '
                          f'stroke="{color}" stroke-width="2"/>')

    def note(self, text: str):
        self.parts.append(f'<text x="{W / 2:.0f}" y="{H / 2:.0f}" text-anchor="middle" '
                          f'font-size="16" fill="#777">{_escape(text)}</text>')

    def render(self) -> str:
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif">',
               f'<rect width="{W}" height="{H}" fill="white"/>']
        x0, x1 = LEFT, W - RIGHT
        y0, y1 = H - BOTTOM, TOP
        out.append(f'<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>')
        for t in _nice_ticks(*self.xr):
            x = self.px(t)
            out.append(f'<line x1="{_num(x)}" y1="{y0}" x2="{_num(x)}" y2="{y0 + 5}" stroke="black"/>')
            out.append(f'<text x="{_num(x)}" y="{y0 + 18}" text-anchor="middle" font-size="11">{t:g}</text>')
        for t in _nice_ticks(*self.yr):
            y = self.py(t)
            out.append(f'<line x1="{x0 - 5}" y1="{_num(y)}" x2="{x0}" y2="{_num(y)}" stroke="black"/>')
            out.append(f'<text x="{x0 - 8}" y="{_num(y + 4)}" text-anchor="end" font-size="11">{t:g}</text>')
        if self.y2label is not None:
            out.append(f'<line x1="{x1}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="black"/>')
            for t in _nice_ticks(*self.y2r):
                y = self.py(t, 2)
                out.append(f'<line x1="{x1}" y1="{_num(y)}" x2="{x1 + 5}" y2="{_num(y)}" stroke="black"/>')
                out.append(f'<text x="{x1 + 8}" y="{_num(y + 4)}" font-size="11">{t:g}</text>')
            out.append(f'<text x="{W - 15}" y="{H / 2:.0f}" font-size="12" text-anchor="middle" '
                       f'transform="rotate(90 {W - 15} {H / 2:.0f})">{_escape(self.y2label)}</text>')
        out.append(f'<text x="{W / 2:.0f}" y="{TOP - 10}" text-anchor="middle" font-size="14">'
                   f'{_escape(self.title)}</text>')
        out.append(f'<text x="{W / 2:.0f}" y="{H - 12}" text-anchor="middle" font-size="12">'
                   f'{_escape(self.xlabel)}</text>')
        out.append(f'<text x="15" y="{H / 2:.0f}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 15 {H / 2:.0f})">{_escape(self.ylabel)}</text>')
        out.extend(self.parts)
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _finite(values) -> list[float]:
    return [v for v in values if isinstance(v, (int, float)) and math.isfinite(v)]


def _require(header: Sequence[str], needed: Sequence[str], kind: str):
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValueError(f"{kind} plot needs column(s) {', '.join(missing)}")


HIST_COLUMNS = ("kind", "x_left", "x_right", "count", "empirical_density", "theory_density")
CURVE_COLUMNS = ("axis_value", "alignment_emp", "alignment_theory")
TRADEOFF_COLUMNS = ("axis_value", "error_emp", "error_theory", "f_spec", "n", "sparsity_emp")


def histogram_svg(rows: Sequence[dict], header: Sequence[str]) -> str:
    _require(header, HIST_COLUMNS, "hist")
    canvas = Canvas("Eigenvalue histogram vs limiting density", "eigenvalue", "density")
    bins = [r for r in rows if r["kind"] == "bin"]
    spikes = [r for r in rows if r["kind"] == "spike"]
    if not bins:
        canvas.note("no data")
        return canvas.render()
    xs = [r["x_left"] for r in bins] + [bins[-1]["x_right"]]
    ys = _finite([r["empirical_density"] for r in bins] + [r["theory_density"] for r in bins])
    canvas.set_ranges((min(xs + [s["x_left"] for s in spikes]), max(xs + [s["x_left"] for s in spikes])),
                      (0.0, 1.1 * max(ys + [1e-12])))
    for r in bins:
        canvas.rect(r["x_left"], r["x_right"], r["empirical_density"])
    mids = [0.5 * (r["x_left"] + r["x_right"]) for r in bins]
    canvas.polyline(mids, [r["theory_density"] for r in bins])
    for s in spikes:
        canvas.cross(s["x_left"], 0.0)
    return canvas.render()


def _group(rows, key="axis_value"):
    groups: "OrderedDict[float, list]" = OrderedDict()
    for r in sorted(rows, key=lambda r: r[key]):
        groups.setdefault(r[key], []).append(r)
    return groups


def _mean_se(values):
    vals = _finite(values)
    if not vals:
        return math.nan, math.nan
    mean = sum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))


def curve_svg(rows: Sequence[dict], header: Sequence[str], field: str = "alignment") -> str:
    _require(header, (("axis_value", f"{field}_emp", f"{field}_theory")), "curve")
    canvas = Canvas(f"{field}: Monte Carlo mean +- s.e. vs theory", "sweep value", field)
    if not rows:
        canvas.note("no data")
        return canvas.render()
    groups = _group(rows)
    xs = list(groups)
    stats = [_mean_se([r[f"{field}_emp"] for r in g]) for g in groups.values()]
    theory = [g[0][f"{field}_theory"] for g in groups.values()]
    ys = _finite([m + s for m, s in stats] + [m - s for m, s in stats] + theory)
    canvas.set_ranges((min(xs), max(xs)), (min(ys + [0.0]), max(ys + [1e-12])))
    canvas.band(xs, [m - s for m, s in stats], [m + s for m, s in stats])
    canvas.marks(xs, [m for m, _ in stats])
    canvas.polyline(xs, theory)
    return canvas.render()


def tradeoff_svg(rows: Sequence[dict], header: Sequence[str]) -> str:
    """Error (left axis) and storage relative to a dense 64-bit kernel (right axis)."""
    from .nonlin import parse_spec, storage_bits
    _require(header, TRADEOFF_COLUMNS, "tradeoff")
    canvas = Canvas("Error and storage vs threshold", "s", "error rate", "storage / dense 64-bit")
    if not rows:
        canvas.note("no data")
        return canvas.render()
    groups = _group(rows)
    xs = list(groups)
    err = [_mean_se([r["error_emp"] for r in g])[0] for g in groups.values()]
    err_th = [g[0]["error_theory"] for g in groups.values()]
    storage = []
    for g in groups.values():
        n = int(g[0]["n"])
        storage.append(storage_bits(parse_spec(g[0]["f_spec"]), n) / (64.0 * n * n))
    ys = _finite(err + err_th)
    canvas.set_ranges((min(xs), max(xs)), (0.0, max(ys + [1e-12]) * 1.1),
                      (0.0, max(_finite(storage) + [1e-12]) * 1.1))
    canvas.marks(xs, err)
    canvas.polyline(xs, err_th)
    canvas.polyline(xs, storage, color="#27ae60", axis=2, dash="6,4")
    return canvas.render()


def render(kind: str, rows: Sequence[dict], header: Sequence[str]) -> str:
    if kind == "hist":
        return histogram_svg(rows, header)
    if kind == "curve":
        return curve_svg(rows, header)
    if kind == "tradeoff":
        return tradeoff_svg(rows, header)
    raise ValueError(f"unknown plot kind {kind!r}")
