import json
import os.path as osp
import shutil
from tempfile import mkdtemp

import pytest

from notchkin.geometry import load_tube, preset_path
from notchkin.kinematics import load_tendon
from notchkin.toolpath import load_recipe

FIXTURES = osp.join(osp.dirname(__file__), "fixtures")


@pytest.fixture
def reference():
    with open(osp.join(FIXTURES, "reference_values.json")) as f:
        return json.load(f)


@pytest.fixture
def tube1():
    return load_tube(preset_path("tube1"))


@pytest.fixture
def tube2():
    return load_tube(preset_path("tube2"))


@pytest.fixture
def tube3():
    return load_tube(preset_path("tube3"))


@pytest.fixture
def tendon():
    return load_tendon(preset_path("tendon"))


@pytest.fixture(params=[1, 2, 3])
def preset(request):
    """``(name, tube, recipe)`` for each shipped tube preset."""
    name = "tube{:d}".format(request.param)
    return (name, load_tube(preset_path(name)),
            load_recipe(preset_path("recipe_" + name)))


@pytest.fixture
def outdir():
    path = mkdtemp()
    try:
        yield path
    finally:
        shutil.rmtree(path)
