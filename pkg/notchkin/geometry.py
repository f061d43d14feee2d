"""Tube and notch geometry.

All lengths are in mm and all angles in radians. The notch arc ``s`` is
measured along the *outer* surface of the tube, so the material left after
machining subtends ``phi = (2 pi r_o - s) / r_o``. Measuring at the outer
radius is an assumption of this model.

"""

import json
import logging
import math
import os.path as osp
from collections import namedtuple
from dataclasses import asdict, dataclass, fields

from scipy.integrate import dblquad

from notchkin.exceptions import InvalidGeometryError

logger = logging.getLogger(__name__)

PRESET_DIR = osp.join(osp.dirname(__file__), "presets")

Violation = namedtuple("Violation", ["field", "constraint"])
CrossSection = namedtuple("CrossSection", ["wedge_angle", "neutral_axis_offset"])


@dataclass(frozen=True)
class TubeSpec:
    """Geometric parameters of one notched tube.

    :param float outer_radius: ``r_o`` [mm]
    :param float inner_radius: ``r_i`` [mm]
    :param float notch_arc: ``s``, arc length at the outer surface [mm]
    :param float notch_width: ``h``, axial length of one notch [mm]
    :param float notch_spacing: ``c``, axial gap between notches [mm]
    :param int notch_count: ``n``
    :param float tip_margin: distal end to first notch [mm]
    :param float hole_offset: distal end to tendon hole center [mm]
    :param float max_stroke: nominal actuator stroke limit [mm], optional;
        only used as a default range for sweeps and synthetic trials.

    """
    outer_radius: float
    inner_radius: float
    notch_arc: float
    notch_width: float
    notch_spacing: float
    notch_count: int
    tip_margin: float = 1.0
    hole_offset: float = 0.5
    max_stroke: float = None


def coerce_fields(cls, data, kind):
    """Convert the known keys of ``data`` to the field types of ``cls``.

    Strings, booleans and ``null`` are rejected, except ``null`` for fields
    that default to ``None``. Integer fields only take integral numbers.

    :param cls: dataclass type.
    :param dict data: parsed JSON object.
    :param str kind: document name used in error messages.
    :returns: dict of keyword arguments for ``cls``.
    :raises ValueError: naming the first field that cannot be converted.

    """
    if not isinstance(data, dict):
        raise ValueError("Malformed {} document: expected a JSON object".format(kind))
    kwargs = {}
    for field in fields(cls):
        if field.name not in data:
            continue
        value = data[field.name]
        if value is None and field.default is None:
            kwargs[field.name] = None
            continue
        try:
            if value is None or isinstance(value, (str, bool)):
                raise TypeError
            converted = field.type(value)
            if converted != value:
                raise ValueError
        except (TypeError, ValueError, OverflowError):
            raise ValueError("{} field {} must be {}, got {!r}".format(
                kind.capitalize(), field.name,
                "an integer" if field.type is int else "a number", value))
        kwargs[field.name] = converted
    return kwargs


def tube_from_dict(data):
    """Build a :class:`TubeSpec` from a JSON-like mapping.

    Unknown keys are ignored with a debug message.

    :raises ValueError: on a missing or mistyped field.

    """
    kwargs = coerce_fields(TubeSpec, data, "tube")
    for key in sorted(set(data) - set(kwargs)):
        logger.debug("Ignoring unknown tube key %s", key)
    try:
        return TubeSpec(**kwargs)
    except TypeError as e:
        raise ValueError("Malformed tube document: {}".format(e))


def tube_to_dict(tube):
    data = asdict(tube)
    if data["max_stroke"] is None:
        del data["max_stroke"]
    return data


def load_tube(path):
    """Read a tube JSON document.

    :param str path: Path to the JSON file.
    :returns: :class:`TubeSpec`

    """
    with open(path) as f:
        data = json.load(f)
    tube = tube_from_dict(data)
    logger.debug("Loaded tube from %s: %s", path, tube)
    return tube


def dump_tube(tube, path):
    with open(path, "w") as f:
        json.dump(tube_to_dict(tube), f, indent=2, sort_keys=True)
        f.write("\n")


def validate_tube(tube):
    """Check every :class:`TubeSpec` invariant.

    :param TubeSpec tube:
    :returns: List of :class:`Violation`; empty iff the tube is valid.

    """
    violations = []
    r_o, r_i = tube.outer_radius, tube.inner_radius
    if not r_i > 0:
        violations.append(Violation("inner_radius", "0 < r_i"))
    if not r_i < r_o:
        violations.append(Violation("inner_radius", "r_i < r_o"))
    if not 0 < tube.notch_arc < 2 * math.pi * r_o:
        violations.append(Violation("notch_arc", "0 < s < 2*pi*r_o"))
    if not tube.notch_width > 0:
        violations.append(Violation("notch_width", "h > 0"))
    if not tube.notch_spacing >= 0:
        violations.append(Violation("notch_spacing", "c >= 0"))
    if not (isinstance(tube.notch_count, int) and tube.notch_count >= 1):
        violations.append(Violation("notch_count", "integer n >= 1"))
    if not tube.tip_margin >= 0:
        violations.append(Violation("tip_margin", "tip_margin >= 0"))
    if not tube.hole_offset >= 0:
        violations.append(Violation("hole_offset", "hole_offset >= 0"))
    if tube.max_stroke is not None and not tube.max_stroke > 0:
        violations.append(Violation("max_stroke", "max_stroke > 0"))
    return violations


def check_tube(tube):
    """Raise :class:`InvalidGeometryError` listing all violations, if any."""
    violations = validate_tube(tube)
    if violations:
        raise InvalidGeometryError("Invalid tube: " + "; ".join(
            "{}: {}".format(v.field, v.constraint) for v in violations))


def wedge_angle(tube):
    """Angle subtended by the material left after machining.

    :param TubeSpec tube:
    :returns: ``phi`` in radians, in ``(0, 2 pi)``.

    """
    r_o = tube.outer_radius
    if not r_o > 0:
        raise InvalidGeometryError("Outer radius must be positive")
    if not 0 < tube.notch_arc < 2 * math.pi * r_o:
        raise InvalidGeometryError(
            "Notch arc {} mm outside (0, 2*pi*r_o)".format(tube.notch_arc))
    return (2 * math.pi * r_o - tube.notch_arc) / r_o


def neutral_axis_offset(tube):
    """Distance from the tube axis to the centroid of the remaining section.

    :param TubeSpec tube:
    :returns: ``y_bar`` in mm.

    """
    phi = wedge_angle(tube)
    r_o, r_i = tube.outer_radius, tube.inner_radius
    if not 0 < r_i < r_o:
        raise InvalidGeometryError("Radii must satisfy 0 < r_i < r_o")
    return (4 * math.sin(phi / 2) * (r_o ** 3 - r_i ** 3)
            / (3 * phi * (r_o ** 2 - r_i ** 2)))


def cross_section(tube):
    """Both cross-section quantities as a :class:`CrossSection`."""
    return CrossSection(wedge_angle(tube), neutral_axis_offset(tube))


def section_centroid_quadrature(tube, epsrel=1e-10):
    """Centroid offset of the remaining section by 2-D quadrature.

    The remaining material is the annular sector of angle ``phi`` centered on
    the +y axis. This is an independent check of :func:`neutral_axis_offset`.

    :param TubeSpec tube:
    :param float epsrel: Relative tolerance passed to ``dblquad``.
    :returns: ``y_bar`` in mm.

    """
    phi = wedge_angle(tube)
    r_o, r_i = tube.outer_radius, tube.inner_radius

    # outer variable: polar angle from +y, inner variable: radius
    moment, _ = dblquad(lambda r, psi: r * r * math.cos(psi),
                        -phi / 2, phi / 2, r_i, r_o, epsrel=epsrel)
    area, _ = dblquad(lambda r, psi: r,
                      -phi / 2, phi / 2, r_i, r_o, epsrel=epsrel)
    return moment / area


def notched_length(tube):
    """Axial extent of the notch pattern, ``n h + (n - 1) c``."""
    n = tube.notch_count
    return n * tube.notch_width + (n - 1) * tube.notch_spacing


def preset_path(name):
    """Path of a shipped preset, e.g. ``preset_path('tube1')``."""
    if not name.endswith(".json"):
        name += ".json"
    return osp.join(PRESET_DIR, name)
