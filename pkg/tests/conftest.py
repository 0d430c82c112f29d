import numpy as np
import pytest

import helpers


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_spec():
    return helpers.small_scene_spec(n_objects=2)


@pytest.fixture
def scene_dir(tmp_path, small_spec):
    """A rendered two-object recording on disk, PCD frames per stage."""
    from depthlabel import write_scene

    root = tmp_path / "scene_a"
    write_scene(small_spec, root)
    return root
