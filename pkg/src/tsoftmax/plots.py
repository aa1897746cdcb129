"""SVG figure emitters: density/posterior curves and decision heat maps.

Plain string templates keep the output dependency-free and byte-stable.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import stats
from .errors import ConfigError
from .model import Model

CLASS_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _hex_to_rgb(h: str) -> np.ndarray:
    return np.array([int(h[i:i + 2], 16) for i in (1, 3, 5)], dtype=np.float64)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


# -- class conditionals and binary posteriors --------------------------------

def pdf_curves(centers: Sequence[float], nu: float, xs: np.ndarray) -> dict[str, np.ndarray]:
    """Densities and class-1 posteriors for two 1-D classes at ``centers``."""
    if len(centers) != 2:
        raise ConfigError("pdf curves need exactly two centers")
    xs = np.asarray(xs, dtype=np.float64)[:, None]
    gauss = [stats.ClassConditional.gaussian([c]) for c in centers]
    studt = [stats.ClassConditional.student_t([c], nu) for c in centers]
    return {
        "x": xs[:, 0],
        "gaussian_pdf": np.stack([stats.gaussian_pdf(c, xs) for c in gauss]),
        "sigmoid": stats.bayes_posterior(gauss, xs)[:, 0],
        "t_pdf": np.stack([stats.t_pdf(c, xs) for c in studt]),
        "t_sigmoid": stats.bayes_posterior(studt, xs)[:, 0],
    }


def _polyline(xs, ys, x_range, y_range, box, color) -> str:
    x0, y0, w, h = box
    px = x0 + (xs - x_range[0]) / (x_range[1] - x_range[0]) * w
    py = y0 + h - (ys - y_range[0]) / (y_range[1] - y_range[0]) * h
    pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'


def render_pdf_svg(curves: dict[str, np.ndarray], nu: float) -> str:
    panel_w, panel_h, pad = 320, 200, 40
    xs = curves["x"]
    x_range = (float(xs.min()), float(xs.max()))
    panels = [
        ("Gaussian p(x|C_i)", [curves["gaussian_pdf"][0], curves["gaussian_pdf"][1]], 0, 0),
        ("sigmoid p(C_1|x)", [curves["sigmoid"]], 1, 0),
        (f"Student-t (nu={nu:g}) p(x|C_i)", [curves["t_pdf"][0], curves["t_pdf"][1]], 0, 1),
        ("t-sigmoid p(C_1|x)", [curves["t_sigmoid"]], 1, 1),
    ]
    width, height = 2 * (panel_w + pad) + pad, 2 * (panel_h + pad) + pad
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    for title, series, row, col in panels:
        x0 = pad + col * (panel_w + pad)
        y0 = pad + row * (panel_h + pad)
        top = max(float(s.max()) for s in series) if row == 0 else 1.0
        y_range = (0.0, top * 1.05)
        out.append(f'<rect x="{x0}" y="{y0}" width="{panel_w}" height="{panel_h}" '
                   f'fill="none" stroke="black"/>')
        out.append(f'<text x="{x0}" y="{y0 - 8}" font-size="12">{title}</text>')
        for i, s in enumerate(series):
            out.append(_polyline(xs, s, x_range, y_range, (x0, y0, panel_w, panel_h),
                                 CLASS_COLORS[i]))
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- max-probability heat map ----------------------------------------------

def decision_grid(model: Model, grid: int = 200, low: float = -6.0, high: float = 6.0):
    """Class probabilities on a ``grid × grid`` lattice of cell centers.

    Returns ``(axis, probs)`` with ``probs`` shaped ``N_c × grid × grid``,
    indexed ``[class, row(y), col(x)]``.
    """
    if model.input_shape != (2,):
        raise ConfigError(f"decision plots need a 2-D input model, got {model.input_shape}")
    step = (high - low) / grid
    axis = low + step * (np.arange(grid) + 0.5)
    gx, gy = np.meshgrid(axis, axis)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    probs = model.probabilities(pts, batch_size=10000)
    return axis, probs.reshape(-1, grid, grid)


def render_decision_svg(probs: np.ndarray, low: float, high: float,
                        points: np.ndarray | None = None, labels: np.ndarray | None = None,
                        cell: int = 3) -> str:
    n_c, grid, _ = probs.shape
    size = grid * cell
    top = probs.max(axis=0)
    winner = probs.argmax(axis=0)
    strength = np.clip((top - 1.0 / n_c) / (1.0 - 1.0 / n_c), 0.0, 1.0)
    white = np.array([255.0, 255.0, 255.0])
    palette = np.stack([_hex_to_rgb(CLASS_COLORS[k % len(CLASS_COLORS)]) for k in range(n_c)])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    for r in range(grid):
        y = (grid - 1 - r) * cell  # row 0 is the lowest y value
        for c in range(grid):
            rgb = white + strength[r, c] * (palette[winner[r, c]] - white)
            color = "#%02x%02x%02x" % tuple(int(round(v)) for v in rgb)
            out.append(f'<rect x="{c * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{color}"><title>{top[r, c]:.4f}</title></rect>')
    if points is not None:
        scale = size / (high - low)
        for (px, py), lab in zip(points, labels if labels is not None else np.zeros(len(points), int)):
            cx, cy = (px - low) * scale, size - (py - low) * scale
            out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="1.5" fill="black" '
                       f'stroke="{CLASS_COLORS[int(lab) % len(CLASS_COLORS)]}" stroke-width="0.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
