"""SVG rendering of environments, decompositions and plans."""

from __future__ import annotations

import colorsys
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from ..decomposition import Decomposition
from ..geometry import Environment
from ..problem import PlanResult, Problem


def robot_color(i: int, n: int) -> str:
    r, g, b = colorsys.hsv_to_rgb((i / max(n, 1)) % 1.0, 0.75, 0.85)
    return "#{:02x}{:02x}{:02x}".format(int(r * 255), int(g * 255), int(b * 255))


def _leaf_rects(decomposition) -> list[tuple[tuple[float, ...], bool]]:
    if decomposition is None:
        return []
    if isinstance(decomposition, Decomposition):
        return [(tuple(c.rect), bool(c.occupied)) for c in decomposition.leaves.values()]
    return [(tuple(c["rect"]), bool(c["occupied"])) for c in decomposition["leaves"]]


def render_svg(
    env: Environment,
    result: PlanResult | None = None,
    decomposition=None,
    problem: Problem | None = None,
    *,
    scale: float = 30.0,
    dt: float = 0.1,
) -> bytes:
    """``decomposition`` may be a :class:`Decomposition` or its dict dump;
    ``problem`` adds start (solid) and goal (dashed) markers."""
    x0, y0, x1, y1 = env.bounds
    w, h = (x1 - x0) * scale, (y1 - y0) * scale

    def X(x):
        return (x - x0) * scale

    def Y(y):
        return (y1 - y) * scale

    def rect(r, cls, extra=""):
        return (f'<rect class="{cls}" x="{X(r[0]):.2f}" y="{Y(r[3]):.2f}" '
                f'width="{(r[2] - r[0]) * scale:.2f}" height="{(r[3] - r[1]) * scale:.2f}"{extra}/>')

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.2f} {h:.2f}">',
        f"<title>{escape(env.name or 'environment')}</title>",
        rect(env.bounds, "bounds", ' fill="white" stroke="black" stroke-width="2"'),
    ]
    leaves = _leaf_rects(decomposition)
    if leaves:
        out.append('<g id="decomposition">')
        for r, occ in leaves:
            fill = "#f2dede" if occ else "none"
            out.append(rect(r, "leaf", f' fill="{fill}" stroke="#9aa" stroke-width="0.7"'))
        out.append("</g>")
    out.append('<g id="obstacles">')
    for r in env.obstacles:
        out.append(rect(r, "obstacle", ' fill="#555"'))
    out.append("</g>")

    n = problem.n if problem is not None else (len(result.trajectories) if result else 0)
    if result is not None and result.trajectories:
        out.append('<g id="trajectories">')
        for i, tr in enumerate(result.trajectories):
            k = max(int(np.ceil(tr.duration / dt)), 1)
            pts = tr.positions_at(np.linspace(0.0, tr.duration, k + 1))
            coords = " ".join(f"{X(p[0]):.2f},{Y(p[1]):.2f}" for p in pts)
            out.append(f'<polyline class="trajectory" data-robot="{i}" points={quoteattr(coords)} '
                       f'fill="none" stroke="{robot_color(i, n)}" stroke-width="2"/>')
        out.append("</g>")
    if problem is not None:
        out.append('<g id="markers">')
        for i in range(problem.n):
            c = robot_color(i, n)
            rr = problem.robots[i].radius * scale
            s, g = problem.starts[i], problem.goals[i]
            out.append(f'<circle class="start" cx="{X(s.x):.2f}" cy="{Y(s.y):.2f}" r="{rr:.2f}" '
                       f'fill="{c}" fill-opacity="0.5" stroke="{c}"/>')
            out.append(f'<circle class="goal" cx="{X(g.x):.2f}" cy="{Y(g.y):.2f}" r="{rr:.2f}" '
                       f'fill="none" stroke="{c}" stroke-width="1.5" stroke-dasharray="4 3"/>')
        out.append("</g>")
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode()
