"""Laser pass plans for notched tubes.

The tube surface is unrolled onto a plane: the first coordinate is axial
distance from the distal end, the second is circumferential distance along
the outer surface. Every feature (each notch, then the tendon hole) is cut
``cuts_per_pass`` times with successive drill offsets, first in focus, then
defocused into the material; that pair of passes is repeated
``repeat_count`` times.

"""

import json
import logging
import math
import re
import xml.etree.ElementTree as ET
from collections import namedtuple
from dataclasses import dataclass

from notchkin.exceptions import InvalidGeometryError, OverlapError
from notchkin.geometry import check_tube, coerce_fields, notched_length

logger = logging.getLogger(__name__)

JOB_SCHEMA = "notchkin-job/1"
# quoted fixed-point numbers written by _r, unquoted after encoding
FIXED = re.compile(r'"(-?\d+\.\d{6})"')
HOLE = "hole"
IN_FOCUS, DEFOCUSED = "in-focus", "defocused"
INWARD, OUTWARD = "inward", "outward"

# JSON header key for each recipe field, units in the name
HEADER_KEYS = (
    ("power", "power_w"),
    ("pulse_frequency", "pulse_frequency_khz"),
    ("scan_speed", "scan_speed_mm_s"),
    ("wavelength", "wavelength_nm"),
    ("drill_offset", "drill_offset_mm"),
    ("defocus_offset", "defocus_offset_mm"),
    ("repeat_count", "repeat_count"),
    ("cuts_per_pass", "cuts_per_pass"),
)

Rect = namedtuple("Rect", ["axial", "circumferential", "width", "height"])
Trace = namedtuple("Trace", ["feature", "cut", "focus", "repeat", "polyline", "depth"])


@dataclass(frozen=True)
class LaserRecipe:
    """Machining parameters.

    :param float power: [W]
    :param float pulse_frequency: [kHz]
    :param float scan_speed: [mm/s]
    :param float wavelength: [nm]
    :param float drill_offset: shift between successive cuts [mm]
    :param float defocus_offset: focal shift into the material [mm]
    :param int repeat_count: repeats of the in-focus/defocused pair
    :param int cuts_per_pass: cuts per feature and focus state

    """
    power: float
    pulse_frequency: float
    scan_speed: float
    wavelength: float
    drill_offset: float
    defocus_offset: float
    repeat_count: int
    cuts_per_pass: int = 4


@dataclass
class PassPlan:
    traces: list

    def __len__(self):
        return len(self.traces)


@dataclass
class UnrolledPattern:
    """Unrolled notch pattern; ``canvas`` is ``(length, circumference)`` in mm."""
    notches: list
    hole: Rect
    canvas: tuple


def recipe_from_dict(data):
    try:
        return LaserRecipe(**coerce_fields(LaserRecipe, data, "recipe"))
    except TypeError as e:
        raise ValueError("Malformed recipe document: {}".format(e))


def load_recipe(path):
    with open(path) as f:
        return recipe_from_dict(json.load(f))


def check_recipe(recipe):
    """Raise :class:`InvalidGeometryError` if a recipe field is out of range."""
    problems = [name for name in ("power", "pulse_frequency", "scan_speed",
                                  "wavelength", "drill_offset", "defocus_offset")
                if not getattr(recipe, name) > 0]
    problems += [name for name in ("repeat_count", "cuts_per_pass")
                 if not (isinstance(getattr(recipe, name), int)
                         and getattr(recipe, name) >= 1)]
    if problems:
        raise InvalidGeometryError("Invalid recipe fields: " + ", ".join(problems))


def unroll_pattern(tube, hole_size=0.3, proximal_margin=1.0, overlap_tolerance=0.0):
    """Lay out the notches and the tendon hole on the unrolled surface.

    Notch ``k`` starts ``tip_margin + k (h + c)`` from the distal end; all
    features are centered on the circumferential midline.

    :param TubeSpec tube:
    :param float hole_size: side of the square tendon hole [mm].
    :param float proximal_margin: uncut length behind the last feature [mm].
    :param float overlap_tolerance: allowed axial overlap of hole and notch [mm].
    :returns: :class:`UnrolledPattern`
    :raises OverlapError: if the hole intersects a notch.

    """
    check_tube(tube)
    circumference = 2 * math.pi * tube.outer_radius
    midline = circumference / 2
    pitch = tube.notch_width + tube.notch_spacing

    notches = [Rect(tube.tip_margin + k * pitch, midline - tube.notch_arc / 2,
                    tube.notch_width, tube.notch_arc)
               for k in range(tube.notch_count)]

    hole_start = tube.hole_offset - hole_size / 2
    if hole_start < 0:
        raise InvalidGeometryError(
            "Tendon hole at {} mm runs past the distal end".format(tube.hole_offset))
    hole = Rect(hole_start, midline - hole_size / 2, hole_size, hole_size)

    for k, notch in enumerate(notches):
        overlap = (min(hole.axial + hole.width, notch.axial + notch.width)
                   - max(hole.axial, notch.axial))
        if overlap > overlap_tolerance:
            raise OverlapError("Tendon hole overlaps notch {:d} by {:.3f} mm".format(
                k, overlap), notch=k)

    length = max(tube.tip_margin + notched_length(tube),
                 hole.axial + hole.width) + proximal_margin
    return UnrolledPattern(notches=notches, hole=hole, canvas=(length, circumference))


def _features(pattern):
    for k, rect in enumerate(pattern.notches):
        yield k, rect
    yield HOLE, pattern.hole


def compile_pass_plan(tube, recipe, direction=INWARD, **layout):
    """Compile the ordered laser traces for a tube.

    Order: per feature, per repeat, the in-focus cuts then the defocused cuts.
    Cut ``j`` moves both axial edges of the feature outline by ``j`` drill
    offsets, towards the feature center for ``inward`` or away from it for
    ``outward``.

    :param TubeSpec tube:
    :param LaserRecipe recipe:
    :param str direction: ``inward`` or ``outward``.
    :param layout: passed on to :func:`unroll_pattern`.
    :returns: :class:`PassPlan`
    :raises InvalidGeometryError: naming the feature whose trace leaves the
        canvas or collapses.

    """
    check_recipe(recipe)
    if direction not in (INWARD, OUTWARD):
        raise ValueError("Unknown drill direction {!r}".format(direction))
    sign = 1.0 if direction == INWARD else -1.0
    pattern = unroll_pattern(tube, **layout)
    length, _ = pattern.canvas
    focus_states = ((IN_FOCUS, 0.0), (DEFOCUSED, -recipe.defocus_offset))

    traces = []
    for feature, rect in _features(pattern):
        outlines = []
        for cut in range(recipe.cuts_per_pass):
            shift = sign * cut * recipe.drill_offset
            start, end = rect.axial + shift, rect.axial + rect.width - shift
            if not end > start:
                raise InvalidGeometryError(
                    "Drill offsets close feature {} at cut {:d}".format(feature, cut))
            if start < 0 or end > length:
                raise InvalidGeometryError(
                    "Feature {} cut {:d} leaves the canvas".format(feature, cut))
            low, high = rect.circumferential, rect.circumferential + rect.height
            outlines.append(((start, low), (end, low), (end, high),
                             (start, high), (start, low)))
        for repeat in range(recipe.repeat_count):
            for focus, depth in focus_states:
                for cut, outline in enumerate(outlines):
                    traces.append(Trace(feature, cut, focus, repeat, outline, depth))

    logger.info("Compiled %d traces for %d features", len(traces),
                len(pattern.notches) + 1)
    return PassPlan(traces)


def expected_trace_count(tube, recipe):
    return (tube.notch_count + 1) * recipe.cuts_per_pass * 2 * recipe.repeat_count


def _r(value):
    return "{:.6f}".format(round(float(value), 6) + 0.0)


def emit_job(plan, recipe):
    """Serialise a plan as a canonical JSON job document.

    Keys are sorted and every real number is written with exactly 6
    decimals, so identical inputs give byte-identical documents.

    :returns: str

    """
    header = {key: getattr(recipe, name) for name, key in HEADER_KEYS}
    header = {key: value if isinstance(value, int) else _r(value)
              for key, value in header.items()}
    document = {
        "schema": JOB_SCHEMA,
        "header": header,
        "trace_count": len(plan.traces),
        "traces": [{
            "feature": trace.feature,
            "cut": trace.cut,
            "focus": trace.focus,
            "repeat": trace.repeat,
            "depth_mm": _r(trace.depth),
            "polyline": [[_r(a), _r(c)] for a, c in trace.polyline],
        } for trace in plan.traces],
    }
    text = json.dumps(document, sort_keys=True, indent=1)
    return FIXED.sub(r"\1", text) + "\n"


def read_job(text):
    """Parse a job document back into ``(recipe, plan)``."""
    document = json.loads(text)
    if document.get("schema") != JOB_SCHEMA:
        raise ValueError("Not a {} document".format(JOB_SCHEMA))
    recipe = recipe_from_dict({name: document["header"][key] for name, key in HEADER_KEYS})
    traces = [Trace(t["feature"], t["cut"], t["focus"], t["repeat"],
                    tuple(tuple(point) for point in t["polyline"]), t["depth_mm"])
              for t in document["traces"]]
    if len(traces) != document["trace_count"]:
        raise ValueError("Job declares {} traces but holds {}".format(
            document["trace_count"], len(traces)))
    return recipe, PassPlan(traces)


def _fmt(value):
    return "{:.6f}".format(value)


def _dimension(parent, start, end, label):
    ET.SubElement(parent, "line", {
        "class": "dimension",
        "x1": _fmt(start[0]), "y1": _fmt(start[1]),
        "x2": _fmt(end[0]), "y2": _fmt(end[1]),
    })
    text = ET.SubElement(parent, "text", {
        "class": "dimension",
        "x": _fmt((start[0] + end[0]) / 2), "y": _fmt((start[1] + end[1]) / 2),
    })
    text.text = label


def emit_pattern_svg(pattern):
    """Draw the unrolled pattern as an SVG 1.1 document in mm.

    Notches and the hole are ``rect`` elements with classes ``notch`` and
    ``hole``. Dimension lines for ``s``, ``h`` and ``c`` are drawn on the first
    notches.

    :param UnrolledPattern pattern:
    :returns: str

    """
    length, circumference = pattern.canvas
    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "version": "1.1",
        "width": _fmt(length) + "mm",
        "height": _fmt(circumference) + "mm",
        "viewBox": "0 0 {} {}".format(_fmt(length), _fmt(circumference)),
    })
    style = ET.SubElement(svg, "style")
    style.text = ("rect.canvas{fill:none;stroke:#888;stroke-width:0.02}"
                  "rect.notch,rect.hole{fill:#333}"
                  "line.dimension{stroke:#c00;stroke-width:0.01}"
                  "text.dimension{font-size:0.2px;fill:#c00}")
    ET.SubElement(svg, "rect", {"class": "canvas", "x": "0", "y": "0",
                                "width": _fmt(length), "height": _fmt(circumference)})

    features = ET.SubElement(svg, "g", {"id": "features"})
    for feature, rect in _features(pattern):
        is_hole = feature == HOLE
        ET.SubElement(features, "rect", {
            "class": HOLE if is_hole else "notch",
            "id": HOLE if is_hole else "notch-{:d}".format(feature),
            "x": _fmt(rect.axial), "y": _fmt(rect.circumferential),
            "width": _fmt(rect.width), "height": _fmt(rect.height),
        })

    dimensions = ET.SubElement(svg, "g", {"id": "dimensions"})
    first = pattern.notches[0]
    below = first.circumferential + first.height + 0.1
    _dimension(dimensions, (first.axial - 0.1, first.circumferential),
               (first.axial - 0.1, first.circumferential + first.height),
               "s = {:.3f} mm".format(first.height))
    _dimension(dimensions, (first.axial, below), (first.axial + first.width, below),
               "h = {:.3f} mm".format(first.width))
    if len(pattern.notches) > 1:
        second = pattern.notches[1]
        _dimension(dimensions, (first.axial + first.width, below), (second.axial, below),
                   "c = {:.3f} mm".format(second.axial - first.axial - first.width))

    tree = ET.ElementTree(svg)
    ET.indent(tree, "  ")
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            + ET.tostring(svg, encoding="unicode") + "\n")
