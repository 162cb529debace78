"""Exports for human inspection: SVG pianorolls and DOT graphs."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .errors import SizeError
from .graph import ScoreGraph
from .score import Score

__all__ = ["pianoroll_svg", "graph_dot", "VOICE_COLORS"]

VOICE_COLORS = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_RELATION_COLORS = {
    "onset": "#1f77b4",
    "during": "#2ca02c",
    "follow": "#ff7f0e",
    "silence": "#d62728",
    "during_rev": "#98df8a",
    "follow_rev": "#ffbb78",
    "silence_rev": "#ff9896",
}

_DOT_NODE_LIMIT = 300


def pianoroll_svg(
    score: Score,
    voice_of: dict[str, int] | None = None,
    links: list[tuple[str, str]] | None = None,
    px_per_tick: float = 6.0,
    row_height: int = 10,
) -> str:
    """Render notes as rectangles (time on x, pitch on y), colored by voice,
    with an arrow per link from source centre to destination centre.

    ``voice_of`` falls back to the score's own voice labels; unlabeled
    notes are drawn gray.
    """
    if voice_of is None:
        voice_of = {n.id: n.voice for n in score.notes if n.voice is not None}
    total_ticks = max((m.onset + m.duration for m in score.measures), default=0)
    pitches = [n.pitch for n in score.notes]
    lo = min(pitches, default=60) - 2
    hi = max(pitches, default=60) + 2
    margin = 12
    width = margin * 2 + total_ticks * px_per_tick
    height = margin * 2 + (hi - lo + 1) * row_height

    def x(tick: float) -> float:
        return margin + tick * px_per_tick

    def y(pitch: int) -> float:
        return margin + (hi - pitch) * row_height

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        "<defs><marker id='arrow' markerWidth='6' markerHeight='6' refX='5' refY='3' orient='auto'>"
        "<path d='M0,0 L6,3 L0,6 z' fill='#333'/></marker></defs>",
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]
    for m in score.measures:
        parts.append(
            f'<line x1="{x(m.onset):.1f}" y1="{margin}" x2="{x(m.onset):.1f}" '
            f'y2="{height - margin}" stroke="#ddd" stroke-width="1"/>'
        )

    centers = {}
    for note in score.notes:
        voice = voice_of.get(note.id)
        color = "#999999" if voice is None else VOICE_COLORS[voice % len(VOICE_COLORS)]
        parts.append(
            f'<rect x="{x(note.onset):.1f}" y="{y(note.pitch):.1f}" '
            f'width="{note.duration * px_per_tick:.1f}" height="{row_height - 1}" '
            f'fill="{color}" rx="2"><title>{escape(note.id)}</title></rect>'
        )
        centers[note.id] = (x(note.onset + note.duration / 2), y(note.pitch) + row_height / 2)

    for u, v in links or []:
        if u not in centers or v not in centers:
            continue
        (x1, y1), (x2, y2) = centers[u], centers[v]
        parts.append(
            f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
            f'stroke="#333" stroke-width="1.2" marker-end="url(#arrow)" class="link"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def graph_dot(graph: ScoreGraph) -> str:
    """Typed-edge DOT export for small graphs (<= 300 nodes)."""
    if graph.n_nodes > _DOT_NODE_LIMIT:
        raise SizeError(
            f"graph has {graph.n_nodes} notes; DOT export is limited to {_DOT_NODE_LIMIT}. "
            "Export a measure range instead."
        )
    lines = ["digraph score {", "  rankdir=LR;", "  node [shape=box, fontsize=10];"]
    for nid in graph.node_ids:
        lines.append(f'  "{nid}";')
    for rel, arr in graph.edges.items():
        color = _RELATION_COLORS.get(rel.value, "#333333")
        for s, d in arr.T:
            lines.append(
                f'  "{graph.node_ids[s]}" -> "{graph.node_ids[d]}" '
                f'[label="{rel.value}", color="{color}", fontsize=8];'
            )
    lines.append("}")
    return "\n".join(lines)
