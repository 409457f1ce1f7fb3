"""Command-line entry point: ``shapelogic line|detect|synth``.

Exit codes: 0 success, 2 I/O failure, 3 degenerate geometry, 4 parse or
validation error, 5 unknown query predicate.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import report
from .dsl import RuleError, parse, parse_query
from .geometry import DegenerateGeometryError, LineParams, line
from .raster import PGMError, read_pgm, write_pgm
from .solver import CandidateConfig, ScoreWeights, SearchLimits, SolverContext, UnknownPredicateError, solve
from .synth import SceneError, parse_scene, render

EXIT_OK = 0
EXIT_IO = 2
EXIT_DEGENERATE = 3
EXIT_INVALID = 4
EXIT_UNKNOWN = 5

log = logging.getLogger("shapelogic")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # usage errors are validation failures; argparse's own exit 2 would read as I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_INVALID, f"{self.prog}: {message}")


def _point(text: str):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return (int(x) if x.is_integer() else x, int(y) if y.is_integer() else y)


def _read_image(path):
    try:
        return read_pgm(path)
    except PGMError as e:
        raise CliError(EXIT_INVALID, f"{path}: malformed PGM at byte {e.offset}: {e}") from None
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot read image {path}: {e.strerror or e}") from None


def _read_text(path, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CliError(EXIT_IO, f"cannot read {what} {path}: {e}") from None


def _write(path, data, what: str):
    try:
        if isinstance(data, bytes):
            Path(path).write_bytes(data)
        else:
            Path(path).write_text(data, encoding="utf-8")
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write {what} {path}: {e.strerror or e}") from None


def _line_params(args) -> LineParams:
    try:
        return LineParams(width=args.width, bins=args.bins, gap=args.gap)
    except ValueError as e:
        raise CliError(EXIT_INVALID, str(e)) from None


def _add_line_flags(p):
    g = p.add_argument_group("border strength")
    g.add_argument("--width", "-d", type=float, default=LineParams.width,
                   help="depth of each flanking rectangle in px (default %(default)s)")
    g.add_argument("--bins", "-n", type=int, default=LineParams.bins,
                   help="intensity histogram bins (default %(default)s)")
    g.add_argument("--gap", type=float, default=LineParams.gap,
                   help="band next to the segment left out of both rectangles (default %(default)s)")


def cmd_line(args) -> int:
    img = _read_image(args.image)
    params = _line_params(args)
    try:
        value = line(img, args.p1, args.p2, params)
    except DegenerateGeometryError as e:
        raise CliError(EXIT_DEGENERATE, str(e)) from None
    print(f"{value:.6f}")
    return EXIT_OK


def _load_weights(path) -> ScoreWeights:
    if path is None:
        return ScoreWeights()
    text = _read_text(path, "weights config")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(EXIT_INVALID, f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(raw, dict) or not all(
            isinstance(v, list) and all(isinstance(w, (int, float)) and not isinstance(w, bool) for w in v)
            for v in raw.values()):
        raise CliError(EXIT_INVALID, f"{path}: expected an object mapping rule names to number lists")
    try:
        return ScoreWeights(raw)
    except ValueError as e:
        raise CliError(EXIT_INVALID, f"{path}: {e}") from None


def cmd_detect(args) -> int:
    img = _read_image(args.image)
    source = _read_text(args.rules, "rules")
    try:
        rules = parse(source)
        query = parse_query(args.query)
    except RuleError as e:
        raise CliError(EXIT_INVALID, f"{args.rules}: {e}") from None
    weights = _load_weights(args.weights)
    try:
        ctx = SolverContext(
            image=img,
            params=_line_params(args),
            candidates=CandidateConfig(stride=args.stride, angle_tolerance=args.angle_tolerance,
                                       length_tolerance=args.length_tolerance,
                                       sampling_step=args.sampling_step,
                                       generative=not args.no_generative),
            weights=weights,
            limits=SearchLimits(max_depth=args.max_depth, max_expansions=args.max_expansions,
                                top_k=args.top_k, nms_radius=args.nms_radius, prune=not args.no_prune),
        )
    except ValueError as e:
        raise CliError(EXIT_INVALID, str(e)) from None
    try:
        found = solve(query, rules, ctx, threads=args.threads)
    except UnknownPredicateError as e:
        raise CliError(EXIT_UNKNOWN, str(e)) from None
    except ValueError as e:
        raise CliError(EXIT_INVALID, str(e)) from None

    doc = report.detection_document(args.query, str(args.image),
                                    report.params_echo(ctx.params, ctx.candidates, weights),
                                    found, found.truncated)
    text = report.dumps(doc)
    if args.output:
        _write(args.output, text, "detections")
    else:
        sys.stdout.write(text)
    if args.svg:
        _write(args.svg, report.svg_overlay(img.width, img.height, doc["detections"], str(args.image)),
               "SVG overlay")
    if args.figure:
        _figure(args.figure, img, doc["detections"], args.query)
    if found.truncated:
        log.warning("expansion budget exhausted; results are best so far")
    if found.depth_exceeded:
        log.info("%d branches cut at recursion depth %d", found.depth_exceeded, args.max_depth)
    log.info("%d detection(s), %d expansions, %d pruned", len(found), found.expansions, found.pruned)
    return EXIT_OK


def _figure(path, img, detections, title, truth=()):
    from .plotting import detection_figure, save_figure
    fig = detection_figure(img, detections, title=title, truth=truth)
    try:
        save_figure(fig, path)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write figure {path}: {e.strerror or e}") from None


def cmd_synth(args) -> int:
    text = _read_text(args.scene, "scene")
    try:
        scene = parse_scene(text)
        img, corners = render(scene)
    except SceneError as e:
        raise CliError(EXIT_INVALID, f"{args.scene}: {e}") from None
    try:
        write_pgm(args.image, img)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot write image {args.image}: {e.strerror or e}") from None
    _write(args.truth, report.dumps(report.truth_document(str(args.image), img, corners)), "ground truth")
    if args.figure:
        _figure(args.figure, img, [], Path(args.scene).name, truth=corners)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shapelogic",
                     description="Detect straight-edged shapes in PGM images with spatial rules.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log search statistics to stderr (-vv for debug output)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("line", help="border strength of one segment")
    p.add_argument("image", type=Path, help="binary PGM (P5) image")
    p.add_argument("p1", type=_point, help="first endpoint as X,Y")
    p.add_argument("p2", type=_point, help="second endpoint as X,Y")
    _add_line_flags(p)
    p.set_defaults(func=cmd_line)

    p = sub.add_parser("detect", help="search an image for a rule's best bindings")
    p.add_argument("image", type=Path, help="binary PGM (P5) image")
    p.add_argument("rules", type=Path, help="rule file")
    p.add_argument("query", help='query such as "house(p1, p2, p3, p4)"')
    p.add_argument("-o", "--output", type=Path, help="write the JSON document here instead of stdout")
    p.add_argument("--svg", type=Path, help="also write an SVG overlay of the detections")
    p.add_argument("--figure", type=Path, help="also write a PNG figure of the image with detections")
    p.add_argument("--weights", type=Path, help='JSON config {"rule": [w1, ..., wk]}')
    c = CandidateConfig()
    lim = SearchLimits()
    g = p.add_argument_group("candidates")
    g.add_argument("--stride", type=int, default=c.stride, help="grid spacing in px (default %(default)s)")
    g.add_argument("--sampling-step", type=int, default=None,
                   help="lattice spacing for constrained loci (default: stride)")
    g.add_argument("--angle-tolerance", type=float, default=c.angle_tolerance,
                   help="degrees allowed on angle equality (default %(default)s)")
    g.add_argument("--length-tolerance", type=float, default=c.length_tolerance,
                   help="px allowed on length equality (default %(default)s)")
    g.add_argument("--no-generative", action="store_true",
                   help="always enumerate the full grid for unbound points")
    g = p.add_argument_group("search")
    g.add_argument("--top-k", type=int, default=lim.top_k, help="detections kept (default %(default)s)")
    g.add_argument("--nms-radius", type=float, default=lim.nms_radius,
                   help="suppression radius in px (default %(default)s)")
    g.add_argument("--max-depth", type=int, default=lim.max_depth,
                   help="recursion depth bound (default %(default)s)")
    g.add_argument("--max-expansions", type=int, default=lim.max_expansions,
                   help="node expansion budget (default %(default)s)")
    g.add_argument("--no-prune", action="store_true", help="disable branch-and-bound")
    g.add_argument("--threads", type=int, default=1, help="worker threads (default %(default)s)")
    _add_line_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    p.add_argument("scene", type=Path, help="INI scene description")
    p.add_argument("image", type=Path, help="output PGM")
    p.add_argument("truth", type=Path, help="output ground-truth JSON")
    p.add_argument("--figure", type=Path, help="also write a PNG figure with the true outlines")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
        logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
