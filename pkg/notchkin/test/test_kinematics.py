import logging
import math
import os.path as osp
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from notchkin import kinematics
from notchkin.exceptions import DomainError, InvalidGeometryError, NotEngagedError
from notchkin.geometry import load_tube, preset_path
from notchkin.kinematics import JointState, TendonSpec, load_tendon


def test_tendon_elongation(tendon, reference):
    expected = reference["tendon_elongation"]
    assert kinematics.tendon_elongation(tendon, expected["force"]) == pytest.approx(
        expected["value"], rel=1e-4)
    assert kinematics.tendon_elongation(tendon, 0.0) == 0.0


def test_tendon_elongation_rejects_negative_force(tendon):
    with pytest.raises(DomainError):
        kinematics.tendon_elongation(tendon, -0.1)


def test_kinematic_stroke(tube1, tendon):
    assert kinematics.kinematic_stroke(tube1, tendon, 0.1) == pytest.approx(0.08739297, rel=1e-6)
    assert kinematics.kinematic_stroke(tube1, tendon, 0.0) == 0.0
    with pytest.raises(DomainError):
        kinematics.kinematic_stroke(tube1, tendon, -0.01)


def test_total_stroke(tube1, tendon):
    state = JointState(deflection=0.1, tension=1.0)
    assert kinematics.total_stroke(tube1, tendon, state) == pytest.approx(0.5847522, rel=1e-6)


def test_stroke_affine_in_deflection(tube2, tendon):
    strokes = [kinematics.total_stroke(tube2, tendon, JointState(theta, 0.7))
               for theta in (0.0, 0.4, 0.8, 1.2)]
    steps = np.diff(strokes)
    assert steps == pytest.approx(np.full(3, steps[0]), rel=1e-12)
    assert steps[0] > 0


def test_stroke_affine_in_tension(tube2, tendon):
    strokes = [kinematics.total_stroke(tube2, tendon, JointState(0.6, force))
               for force in (0.0, 0.5, 1.0, 1.5, 2.0)]
    steps = np.diff(strokes)
    assert steps == pytest.approx(np.full(4, steps[0]), rel=1e-12)
    assert steps[0] == pytest.approx(0.5 * kinematics.tendon_compliance(tendon), rel=1e-12)


def test_predict_deflection(tube1, tendon, reference):
    expected = reference["tube1_predict"]
    theta = kinematics.predict_deflection(tube1, tendon, expected["stroke"], expected["force"])
    assert theta == pytest.approx(expected["deflection"], rel=1e-4)
    assert math.degrees(theta) == pytest.approx(98.51, abs=0.01)


def test_predict_deflection_not_engaged(tube1, tendon):
    with pytest.raises(NotEngagedError) as excinfo:
        kinematics.predict_deflection(tube1, tendon, 0.3, 1.0)
    assert excinfo.value.slack == pytest.approx(0.4973592 - 0.3, rel=1e-4)
    assert isinstance(excinfo.value, DomainError)


def test_predict_deflection_at_exact_engagement(tube1, tendon):
    elongation = kinematics.tendon_elongation(tendon, 2.0)
    assert kinematics.predict_deflection(tube1, tendon, elongation, 2.0) == 0.0


def test_predict_deflection_without_tension(tube2, tendon):
    theta = kinematics.predict_deflection(tube2, tendon, 1.0, 0.0)
    assert theta == pytest.approx(1.0 / kinematics.moment_arm(tube2, tendon))


def test_roundtrip(tube1, tube2, tube3, tendon):
    rng = np.random.default_rng(7)
    tubes = (tube1, tube2, tube3)
    for _ in range(10000):
        tube = tubes[rng.integers(3)]
        theta = rng.uniform(0, math.pi)
        force = rng.uniform(0, 5)
        stroke = kinematics.total_stroke(tube, tendon, JointState(theta, force))
        assert kinematics.predict_deflection(tube, tendon, stroke, force) == \
            pytest.approx(theta, rel=1e-12, abs=1e-12)


@given(theta=st.floats(0, math.pi), force=st.floats(0, 10),
       modulus=st.floats(1e3, 3e5))
@settings(max_examples=300, deadline=None)
def test_roundtrip_property(theta, force, modulus):
    tube3 = load_tube(preset_path("tube3"))
    tendon = TendonSpec(radius=0.04, free_length=70.0, modulus=modulus)
    stroke = kinematics.total_stroke(tube3, tendon, JointState(theta, force))
    assert kinematics.predict_deflection(tube3, tendon, stroke, force) == \
        pytest.approx(theta, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("name", ["tube1", "tube2", "tube3"])
def test_deflection_monotone_in_stroke(name, tendon):
    tube = load_tube(preset_path(name))
    strokes = np.linspace(0.5, 5.0, 50)
    thetas = [kinematics.predict_deflection(tube, tendon, s, 1.0) for s in strokes]
    assert np.all(np.diff(thetas) > 0)


def test_deflection_decreases_with_arc(tube2, tendon):
    arcs = np.linspace(0.5, 5.0, 20)
    thetas = [kinematics.predict_deflection(replace(tube2, notch_arc=s), tendon, 2.0, 0.5)
              for s in arcs]
    assert np.all(np.diff(thetas) < 0)


def test_tendon_must_fit_lumen(tube1):
    thick = TendonSpec(radius=0.45, free_length=70.0, modulus=28000.0)
    with pytest.raises(InvalidGeometryError):
        kinematics.predict_deflection(tube1, thick, 2.0, 1.0)


def test_missing_modulus(tube1):
    bare = TendonSpec(radius=0.04, free_length=70.0)
    with pytest.raises(DomainError):
        kinematics.predict_deflection(tube1, bare, 2.0, 1.0)
    assert kinematics.moment_arm(tube1, bare) == pytest.approx(0.8739297, rel=1e-6)


def test_predict_series_matches_scalar(tube2, tendon):
    rng = np.random.default_rng(3)
    samples = np.column_stack([rng.uniform(0, 3, 500), rng.uniform(0, 2, 500)])
    prediction = kinematics.predict_series(tube2, tendon, samples)
    for (stroke, force), theta, engaged in zip(samples, prediction.deflection,
                                               prediction.engaged):
        try:
            expected = kinematics.predict_deflection(tube2, tendon, stroke, force)
        except NotEngagedError:
            assert not engaged
            assert theta == 0.0
        else:
            assert engaged
            assert theta == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_predict_series_rejects_negative_force(tube2, tendon):
    with pytest.raises(DomainError):
        kinematics.predict_series(tube2, tendon, [(1.0, 0.5), (1.0, -0.5)])


def test_closure_limit(tube1, reference):
    assert kinematics.notch_closure_limit(tube1) == pytest.approx(
        reference["tube1_closure_limit"], rel=1e-4)


def test_closure_warning(tube1, tendon, caplog):
    with caplog.at_level(logging.WARNING, logger="notchkin"):
        kinematics.predict_deflection(tube1, tendon, 2.0, 1.0)
    assert not caplog.records
    short = replace(tube1, notch_count=2)
    with caplog.at_level(logging.WARNING, logger="notchkin"):
        theta = kinematics.predict_deflection(short, tendon, 2.0, 1.0)
    assert theta > kinematics.notch_closure_limit(short)
    assert any("closure" in r.getMessage() for r in caplog.records)


def test_tip_pose_straight(tube1):
    pose = kinematics.tip_pose(tube1, 0.0)
    assert pose.x == pytest.approx(0.0, abs=1e-12)
    assert pose.y == pytest.approx(kinematics.backbone_length(tube1))
    assert pose.heading == 0.0
    assert kinematics.backbone_length(tube1) == pytest.approx(10.5)


def test_tip_pose_quarter_circle(tube1):
    single = replace(tube1, notch_count=1, notch_spacing=0.0, tip_margin=0.0)
    pose = kinematics.tip_pose(single, math.pi / 2)
    radius = single.notch_width / (math.pi / 2)
    assert pose.x == pytest.approx(radius, rel=1e-12)
    assert pose.y == pytest.approx(radius, rel=1e-12)
    assert pose.heading == math.pi / 2


def test_tip_pose_straight_tip_margin(tube1):
    single = replace(tube1, notch_count=1, tip_margin=2.0)
    pose = kinematics.tip_pose(single, math.pi / 2)
    radius = single.notch_width / (math.pi / 2)
    assert pose.x == pytest.approx(radius + 2.0, rel=1e-12)
    assert pose.y == pytest.approx(radius, rel=1e-12)


def test_tip_pose_heading_is_deflection(tube3):
    for theta in np.linspace(0, math.pi, 7):
        assert kinematics.tip_pose(tube3, theta).heading == theta
    with pytest.raises(DomainError):
        kinematics.tip_pose(tube3, -0.1)


@pytest.mark.parametrize("name", ["tube1", "tube2", "tube3"])
def test_tip_polyline_preserves_length(name):
    tube = load_tube(preset_path(name))
    for theta in np.linspace(0, kinematics.notch_closure_limit(tube), 12):
        points = np.asarray(kinematics.tip_polyline(tube, theta))
        length = np.sum(np.hypot(*np.diff(points, axis=0).T))
        assert length == pytest.approx(kinematics.backbone_length(tube), rel=1e-6)
        assert tuple(points[-1]) == pytest.approx(tuple(kinematics.tip_pose(tube, theta)[:2]),
                                                  abs=1e-9)
        assert kinematics.tip_pose(tube, theta).heading == theta


def test_tendon_json_roundtrip(tendon, outdir):
    path = osp.join(outdir, "tendon.json")
    kinematics.dump_tendon(tendon, path)
    assert kinematics.load_tendon(path) == tendon
    with pytest.raises(ValueError):
        kinematics.tendon_from_dict({"radius": 0.04})
    with pytest.raises(ValueError) as excinfo:
        kinematics.tendon_from_dict({"radius": 0.04, "free_length": 70.0, "modulus": "28000"})
    assert "modulus" in str(excinfo.value)
    assert kinematics.tendon_from_dict({"radius": 0.04, "free_length": 70,
                                        "modulus": None}).modulus is None


@given(theta=st.floats(0, math.pi), force=st.floats(0, 10), step=st.floats(1e-3, 1.0))
@settings(max_examples=200, deadline=None)
def test_stroke_increases_with_deflection_and_tension(theta, force, step):
    tube = load_tube(preset_path("tube1"))
    tendon = load_tendon(preset_path("tendon"))
    base = kinematics.total_stroke(tube, tendon, JointState(theta, force))
    assert kinematics.total_stroke(tube, tendon, JointState(theta + step, force)) > base
    assert kinematics.total_stroke(tube, tendon, JointState(theta, force + step)) > base


def test_zero_stroke_zero_force(tube1, tendon):
    assert kinematics.predict_deflection(tube1, tendon, 0.0, 0.0) == 0.0
