"""Serialized forms of detections: a JSON document and an SVG overlay.

The JSON writer is byte-stable: keys keep a fixed insertion order and every
float is rounded to six fractional digits before encoding.
"""

from __future__ import annotations

import json
import math
import re
from typing import Iterable, Mapping, Optional, Sequence
from xml.sax.saxutils import escape

from .geometry import DegenerateGeometryError, LineParams, line
from .raster import GrayImage
from .solver import CandidateConfig, Detection, ScoreWeights

DIGITS = 6


def _num(v):
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, int):
        return v
    f = round(float(v), DIGITS)
    return 0.0 if f == 0 else f  # no negative zero


def _xy(p) -> list:
    return [_num(p[0]), _num(p[1])]


def params_echo(params: LineParams, candidates: CandidateConfig,
                weights: ScoreWeights) -> dict:
    return {
        "stride": candidates.stride,
        "bins": params.bins,
        "width": _num(params.width),
        "gap": _num(params.gap),
        "angle_tolerance": _num(candidates.angle_tolerance),
        "length_tolerance": _num(candidates.length_tolerance),
        "sampling_step": candidates.step,
        "generative": candidates.generative,
        "weights": {k: [_num(w) for w in ws] for k, ws in sorted(weights.per_rule.items())},
    }


def detection_entry(points: Mapping[str, Sequence[float]], segments: Iterable, score: float) -> dict:
    return {
        "points": {name: _xy(p) for name, p in points.items()},
        "score": _num(score),
        "segments": [{"from": _xy(a), "to": _xy(b), "b": _num(s)} for a, b, s in segments],
    }


def detection_document(query: str, image: str, params: dict,
                       detections: Sequence[Detection], truncated: bool = False) -> dict:
    return {
        "query": query,
        "image": image,
        "params": params,
        "detections": [detection_entry(d.bindings, d.segments, d.score) for d in detections],
        "truncated": bool(truncated),
    }


def truth_document(image: str, img: GrayImage, corners: Sequence[Sequence],
                   params: LineParams = LineParams()) -> dict:
    """Ground-truth sidecar in the detection format.

    Each rectangle becomes one entry with points ``p1..p4`` and its four
    edges; ``b`` is the border strength of that edge on the rendered image
    and the score is their mean.
    """
    entries = []
    for quad in corners:
        segs = []
        for a, b in zip(quad, quad[1:] + quad[:1]):
            try:
                s = line(img, a, b, params)
            except DegenerateGeometryError:
                s = 0.0
            segs.append((a, b, s))
        names = {f"p{i + 1}": p for i, p in enumerate(quad)}
        entries.append(detection_entry(names, segs, math.fsum(s for _, _, s in segs) / len(segs)))
    return {
        "query": "truth",
        "image": image,
        "params": {"bins": params.bins, "width": _num(params.width), "gap": _num(params.gap)},
        "detections": entries,
        "truncated": False,
    }


_PAIR = re.compile(r"\[\s+(-?[0-9.eE+-]+),\s+(-?[0-9.eE+-]+)\s+\]")


def dumps(doc: dict) -> str:
    """Indented JSON with coordinate pairs kept on one line."""
    text = json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False)
    return _PAIR.sub(r"[\1, \2]", text) + "\n"


def svg_overlay(width: int, height: int, detections: Sequence[dict],
                image_ref: Optional[str] = None) -> str:
    """SVG sized like the image with one outlined polygon per detection.

    ``detections`` are entries of a detection document. Each polygon carries
    its score as a label next to its first vertex and as a tooltip.
    """
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    if image_ref is not None:
        out.append(f"  <title>{escape(image_ref)}</title>")
    out.append(f'  <rect x="0" y="0" width="{width}" height="{height}" fill="#202020"/>')
    for rank, det in enumerate(detections):
        pts = list(det["points"].values())
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        label = f"{det['score']:.3f}"
        color = "#ffd400" if rank == 0 else "#00b4ff"
        out.append(f'  <g class="detection" data-rank="{rank}">')
        out.append(f'    <polygon points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="0.6"><title>{escape(label)}</title></polygon>')
        x, y = pts[0]
        out.append(f'    <text x="{_fmt(x + 0.8)}" y="{_fmt(y - 0.8)}" font-size="3" '
                   f'fill="{color}">{escape(label)}</text>')
        out.append("  </g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s
