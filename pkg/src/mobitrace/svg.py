"""Minimal dependency-free SVG output for the two plot-bearing commands.

Deliberately spartan: a framed data area, tick labels at the corners, and
either circles or a polyline. Anything fancier belongs in a real plotting
tool fed from the CSV outputs.
"""

from __future__ import annotations

import math
from typing import IO, Sequence

import numpy as np

from .errors import BadArgument

_WIDTH = 640
_HEIGHT = 480
_MARGIN = 48


def _fmt(v: float) -> str:
    return "%.6g" % v


class _Frame:
    """Maps data coordinates into the pixel viewport, optionally in log10."""

    def __init__(self, x, y, log_x: bool, log_y: bool):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.size == 0:
            raise BadArgument("nothing to plot")
        if log_x:
            if np.any(x <= 0):
                raise BadArgument("log x axis requires positive values")
            x = np.log10(x)
        if log_y:
            if np.any(y <= 0):
                raise BadArgument("log y axis requires positive values")
            y = np.log10(y)
        self.x = x
        self.y = y
        self.log_x = log_x
        self.log_y = log_y
        self.x_lo, self.x_hi = self._padded(x)
        self.y_lo, self.y_hi = self._padded(y)

    @staticmethod
    def _padded(v: np.ndarray) -> tuple[float, float]:
        lo = float(v.min())
        hi = float(v.max())
        if lo == hi:
            pad = 1.0 if lo == 0.0 else abs(lo) * 0.1
        else:
            pad = (hi - lo) * 0.05
        return lo - pad, hi + pad

    def px(self, vx: float) -> float:
        t = (vx - self.x_lo) / (self.x_hi - self.x_lo)
        return _MARGIN + t * (_WIDTH - 2 * _MARGIN)

    def py(self, vy: float) -> float:
        t = (vy - self.y_lo) / (self.y_hi - self.y_lo)
        return _HEIGHT - _MARGIN - t * (_HEIGHT - 2 * _MARGIN)

    def corner_label(self, value: float, log: bool) -> str:
        return _fmt(10.0**value if log else value)


def _emit(out: IO[str], frame: _Frame, body: list[str], title: str | None, axis_labels: tuple[str, str]) -> None:
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">\n'
    )
    out.write(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>\n')
    out.write(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_WIDTH - 2 * _MARGIN}" '
        f'height="{_HEIGHT - 2 * _MARGIN}" fill="none" stroke="black"/>\n'
    )
    if title:
        out.write(
            f'<text x="{_WIDTH // 2}" y="{_MARGIN - 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>\n'
        )
    style = 'font-family="sans-serif" font-size="11"'
    out.write(
        f'<text x="{_MARGIN}" y="{_HEIGHT - _MARGIN + 16}" {style}>'
        f"{frame.corner_label(frame.x_lo, frame.log_x)}</text>\n"
    )
    out.write(
        f'<text x="{_WIDTH - _MARGIN}" y="{_HEIGHT - _MARGIN + 16}" text-anchor="end" {style}>'
        f"{frame.corner_label(frame.x_hi, frame.log_x)}</text>\n"
    )
    out.write(
        f'<text x="{_MARGIN - 4}" y="{_HEIGHT - _MARGIN}" text-anchor="end" {style}>'
        f"{frame.corner_label(frame.y_lo, frame.log_y)}</text>\n"
    )
    out.write(
        f'<text x="{_MARGIN - 4}" y="{_MARGIN + 4}" text-anchor="end" {style}>'
        f"{frame.corner_label(frame.y_hi, frame.log_y)}</text>\n"
    )
    out.write(
        f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 12}" text-anchor="middle" {style}>'
        f"{axis_labels[0]}</text>\n"
    )
    out.write(
        f'<text x="14" y="{_HEIGHT // 2}" text-anchor="middle" {style} '
        f'transform="rotate(-90 14 {_HEIGHT // 2})">{axis_labels[1]}</text>\n'
    )
    for line in body:
        out.write(line + "\n")
    out.write("</svg>\n")


def render_scatter(
    xy: np.ndarray,
    out: IO[str],
    title: str | None = None,
    axis_labels: tuple[str, str] = ("x", "y"),
) -> None:
    """Point cloud, one 1.5px circle per row of xy."""
    arr = np.asarray(xy, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise BadArgument(f"expected (n, 2) points, got shape {arr.shape}")
    frame = _Frame(arr[:, 0], arr[:, 1], log_x=False, log_y=False)
    body = [
        f'<circle cx="{_fmt(frame.px(px_val))}" cy="{_fmt(frame.py(py_val))}" r="1.5" '
        f'fill="black" fill-opacity="0.5"/>'
        for px_val, py_val in zip(frame.x.tolist(), frame.y.tolist())
    ]
    _emit(out, frame, body, title, axis_labels)


def render_curve(
    x: Sequence[float],
    y: Sequence[float],
    out: IO[str],
    log_x: bool = False,
    log_y: bool = False,
    title: str | None = None,
    axis_labels: tuple[str, str] = ("x", "y"),
) -> None:
    """Polyline with point markers; zero y values are dropped on log axes."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise BadArgument(f"expected matching vectors, got {xa.shape} and {ya.shape}")
    keep = np.ones(xa.shape, dtype=bool)
    if log_x:
        keep &= xa > 0
    if log_y:
        keep &= ya > 0
    if not np.any(keep):
        raise BadArgument("nothing to plot after dropping non-positive values")
    frame = _Frame(xa[keep], ya[keep], log_x=log_x, log_y=log_y)
    points = " ".join(
        f"{_fmt(frame.px(vx))},{_fmt(frame.py(vy))}"
        for vx, vy in zip(frame.x.tolist(), frame.y.tolist())
    )
    body = [f'<polyline points="{points}" fill="none" stroke="black" stroke-width="1"/>']
    body += [
        f'<circle cx="{_fmt(frame.px(vx))}" cy="{_fmt(frame.py(vy))}" r="2.5" fill="black"/>'
        for vx, vy in zip(frame.x.tolist(), frame.y.tolist())
    ]
    _emit(out, frame, body, title, axis_labels)
