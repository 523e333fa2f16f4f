from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from statecast import fixtures  # noqa: E402
from statecast.scene import CameraPose, GameObject, SceneModel, look_at, perspective, translation  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")

PALETTE = {0: (255, 0, 0), 1: (0, 0, 255), 2: (0, 200, 0), 3: (200, 200, 40)}


def small_scene(objects, poses, rgb=(64, 48), state=(32, 24), palette=None) -> SceneModel:
    W, H = rgb
    proj = perspective(60.0, W / H, 0.1, 100.0)
    path = [CameraPose(look_at(eye, target), proj, f) for f, (eye, target) in enumerate(poses)]
    return SceneModel(objects, dict(palette or PALETTE), path, rgb, state)


def random_scene(rng: np.random.Generator, n_objects: int = 5, frames: int = 2,
                 rgb=(64, 48), state=(32, 24)) -> SceneModel:
    """Boxes scattered around the origin, viewed from a jittered camera."""
    objs = []
    for i in range(n_objects):
        verts, tris = fixtures.grid_box(int(rng.integers(1, 4)))
        size = rng.uniform(0.5, 2.0, 3)
        center = rng.uniform([-3, 0, -3], [3, 1.5, 3])
        objs.append(GameObject(i, verts * size, tris, int(rng.integers(0, len(PALETTE))),
                               [translation(*center)]))
    poses = []
    for _ in range(frames):
        eye = rng.uniform([-2, 2, 9], [2, 5, 12])
        poses.append((tuple(eye), (0.0, 0.5, 0.0)))
    return small_scene(objs, poses, rgb, state)


@pytest.fixture(scope="session")
def pan_inputs():
    from statecast import netsim
    return netsim.prepare_session(fixtures.pan_scene(frames=20))
