"""Stroke-deflection model of a tendon-driven notched joint.

The tendon stroke splits into a kinematic part and the tendon's own elastic
elongation::

    L_t = L_kin + L_el
    L_kin = (y_bar + r_i - r_t) * theta
    L_el = F * L_0 / (E_t * pi * r_t**2)

Tension ``F`` is always an input: it is measured on the bench, the model has no
joint stiffness law. The joint bends one way only, so negative angles are
rejected rather than mirrored.

"""

import json
import logging
import math
from collections import namedtuple
from dataclasses import asdict, dataclass

import numpy as np

from notchkin.exceptions import DomainError, InvalidGeometryError, NotEngagedError
from notchkin.geometry import check_tube, coerce_fields, neutral_axis_offset, notched_length

logger = logging.getLogger(__name__)

PlanarPose = namedtuple("PlanarPose", ["x", "y", "heading"])
SeriesPrediction = namedtuple("SeriesPrediction", ["deflection", "engaged"])


@dataclass(frozen=True)
class TendonSpec:
    """Tendon parameters.

    :param float radius: ``r_t`` [mm]
    :param float free_length: ``L_0``, unactuated length [mm]
    :param float modulus: ``E_t`` [MPa]; may be None before calibration.

    """
    radius: float
    free_length: float
    modulus: float = None


@dataclass(frozen=True)
class JointState:
    """Joint deflection ``theta`` [rad] and tendon tension ``F`` [N]."""
    deflection: float
    tension: float


def tendon_from_dict(data):
    kwargs = coerce_fields(TendonSpec, data, "tendon")
    for key in ("radius", "free_length"):
        if key not in kwargs:
            raise ValueError("Tendon document is missing {!r}".format(key))
    return TendonSpec(**kwargs)


def load_tendon(path):
    """Read a tendon JSON document (``radius``, ``free_length``, ``modulus``)."""
    with open(path) as f:
        return tendon_from_dict(json.load(f))


def dump_tendon(tendon, path):
    data = {k: v for k, v in asdict(tendon).items() if v is not None}
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def check_tendon(tendon, tube=None, require_modulus=True):
    """Check tendon invariants, and that it fits the lumen of ``tube``.

    :raises InvalidGeometryError: on a broken invariant.
    :raises DomainError: if ``require_modulus`` and the modulus is missing.

    """
    if not (tendon.radius > 0 and tendon.free_length > 0):
        raise InvalidGeometryError("Tendon radius and free length must be positive")
    if tendon.modulus is None:
        if require_modulus:
            raise DomainError("Tendon modulus is required but not given")
    elif not tendon.modulus > 0:
        raise InvalidGeometryError("Tendon modulus must be positive")
    if tube is not None and not tendon.radius < tube.inner_radius:
        raise InvalidGeometryError(
            "Tendon radius {} mm does not fit inner radius {} mm".format(
                tendon.radius, tube.inner_radius))


def moment_arm(tube, tendon):
    """``y_bar + r_i - r_t``: stroke per radian of deflection [mm/rad]."""
    check_tube(tube)
    check_tendon(tendon, tube, require_modulus=False)
    return neutral_axis_offset(tube) + tube.inner_radius - tendon.radius


def tendon_compliance(tendon):
    """``L_0 / (E_t pi r_t^2)``: elongation per newton [mm/N]."""
    check_tendon(tendon)
    return tendon.free_length / (tendon.modulus * math.pi * tendon.radius ** 2)


def notch_closure_limit(tube):
    """Deflection at which notch gaps close at the outer wall [rad].

    This is a heuristic, ``n h / (y_bar + r_o)``, used only as a warning
    threshold.

    """
    check_tube(tube)
    return (tube.notch_count * tube.notch_width
            / (neutral_axis_offset(tube) + tube.outer_radius))


def _warn_closure(tube, theta):
    limit = notch_closure_limit(tube)
    if theta > limit:
        logger.warning("Deflection %.4f rad exceeds the notch closure limit "
                       "%.4f rad", theta, limit)


def kinematic_stroke(tube, tendon, theta):
    """Kinematic stroke ``L_kin`` [mm] for a deflection ``theta`` [rad]."""
    if theta < 0:
        raise DomainError("Deflection must be non-negative, got {}".format(theta))
    return moment_arm(tube, tendon) * theta


def tendon_elongation(tendon, force):
    """Elastic elongation ``L_el`` [mm] of the tendon under ``force`` [N]."""
    if force < 0:
        raise DomainError("Tension must be non-negative, got {}".format(force))
    return force * tendon_compliance(tendon)


def total_stroke(tube, tendon, state):
    """Total tendon stroke ``L_t`` [mm] for a :class:`JointState`."""
    _warn_closure(tube, state.deflection)
    return (kinematic_stroke(tube, tendon, state.deflection)
            + tendon_elongation(tendon, state.tension))


def predict_deflection(tube, tendon, stroke, force):
    """Invert the stroke model for the joint deflection.

    :param TubeSpec tube:
    :param TendonSpec tendon:
    :param float stroke: ``L_t`` [mm]
    :param float force: ``F`` [N]
    :returns: ``theta`` [rad]
    :raises NotEngagedError: if the stroke does not cover the elongation.

    """
    elongation = tendon_elongation(tendon, force)
    if stroke < elongation:
        raise NotEngagedError(
            "Stroke {:.6g} mm is below the tendon elongation {:.6g} mm".format(
                stroke, elongation),
            slack=elongation - stroke)
    theta = (stroke - elongation) / moment_arm(tube, tendon)
    _warn_closure(tube, theta)
    return theta


def predict_series(tube, tendon, samples, warn=True):
    """Elementwise :func:`predict_deflection` over ``(L_t, F)`` samples.

    Samples that have not engaged map to ``theta = 0`` and are flagged.

    :param samples: sequence of ``(stroke, force)`` pairs, or an ``(N, 2)`` array.
    :param bool warn: log a warning when samples exceed the notch closure limit.
    :returns: :class:`SeriesPrediction` of two arrays, deflection [rad] and
        an ``engaged`` mask.

    """
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    stroke, force = samples[:, 0], samples[:, 1]
    if np.any(force < 0):
        raise DomainError("Tension must be non-negative")
    elongation = force * tendon_compliance(tendon)
    engaged = stroke >= elongation
    deflection = np.where(engaged, (stroke - elongation) / moment_arm(tube, tendon), 0.0)
    if warn and len(deflection):
        limit = notch_closure_limit(tube)
        above = int(np.count_nonzero(deflection > limit))
        if above:
            logger.warning("%d samples exceed the notch closure limit %.4f rad",
                           above, limit)
    return SeriesPrediction(deflection, engaged)


def _backbone(tube, theta):
    """Yield the backbone pieces from base to tip as ``(length, bend)``."""
    bend = theta / tube.notch_count
    for k in range(tube.notch_count):
        if k:
            yield tube.notch_spacing, 0.0
        yield tube.notch_width, bend
    yield tube.tip_margin, 0.0


def _walk(tube, theta, segments):
    x, y, heading = 0.0, 0.0, 0.0
    points = [(x, y)]
    for length, bend in _backbone(tube, theta):
        if length == 0:
            continue
        steps = segments if bend else 1
        step_bend = bend / steps
        # chord of a circular arc, exact for bend -> 0
        chord = length / steps * np.sinc(step_bend / (2 * math.pi))
        for _ in range(steps):
            mid = heading + step_bend / 2
            x += chord * math.sin(mid)
            y += chord * math.cos(mid)
            heading += step_bend
            points.append((x, y))
    return points


def tip_pose(tube, theta):
    """Distal pose of the bent joint under the constant-curvature assumption.

    The deflection is shared equally by the notches; each notch is an arc of
    length ``h``, spacings and the tip margin stay straight. The base sits at
    the origin pointing along +y and the joint bends towards +x.

    :param TubeSpec tube:
    :param float theta: Total deflection [rad].
    :returns: :class:`PlanarPose`; ``heading`` equals ``theta``.

    """
    if theta < 0:
        raise DomainError("Deflection must be non-negative, got {}".format(theta))
    check_tube(tube)
    x, y = _walk(tube, theta, 1)[-1]
    return PlanarPose(x, y, theta)


def tip_polyline(tube, theta, segments=128):
    """Backbone of the bent joint as a list of ``(x, y)`` vertices.

    :param int segments: Chords per notch arc.

    """
    if theta < 0:
        raise DomainError("Deflection must be non-negative, got {}".format(theta))
    check_tube(tube)
    return _walk(tube, theta, segments)


def backbone_length(tube):
    """Arc length of the backbone, ``notched_length + tip_margin``."""
    return notched_length(tube) + tube.tip_margin
