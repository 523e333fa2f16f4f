"""Deterministic demo scenes used by the CLI, the tests and the acceptance suite."""

from __future__ import annotations

import math

import numpy as np

from .scene import (CameraPose, GameObject, SceneModel, look_at, perspective, rotation_y,
                    translation)

PALETTE = {
    0: (200, 40, 40),
    1: (40, 160, 60),
    2: (50, 70, 200),
    3: (220, 190, 60),
    4: (150, 90, 40),
    5: (90, 200, 200),
    6: (180, 80, 180),
    7: (230, 230, 230),
    8: (60, 60, 60),
    9: (110, 150, 60),
    10: (240, 140, 40),
    11: (30, 110, 120),
}

RGB_RESOLUTION = (480, 272)
STATE_RESOLUTION = (128, 64)
SCENE_KINDS = ("pan", "orbit", "two-motion", "village_toy")


def grid_box(subdiv: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Unit cube [-0.5, 0.5]^3 whose faces are ``subdiv`` x ``subdiv`` quad grids."""
    verts, tris = [], []
    ticks = np.linspace(-0.5, 0.5, subdiv + 1)
    for axis in range(3):
        for sign in (-1.0, 1.0):
            base = len(verts)
            for a in ticks:
                for b in ticks:
                    p = [0.0, 0.0, 0.0]
                    p[axis] = 0.5 * sign
                    p[(axis + 1) % 3], p[(axis + 2) % 3] = a, b
                    verts.append(p)
            n = subdiv + 1
            for i in range(subdiv):
                for j in range(subdiv):
                    v00 = base + i * n + j
                    tris.append((v00, v00 + n, v00 + 1))
                    tris.append((v00 + 1, v00 + n, v00 + n + 1))
    return np.array(verts), np.array(tris)


def cube() -> tuple[np.ndarray, np.ndarray]:
    """Plain 8-vertex, 12-triangle unit cube."""
    verts = np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)])
    faces = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = [t for a, b, c, d in faces for t in ((a, b, c), (a, c, d))]
    return verts, np.array(tris)


def grid_plane(subdiv: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit square in the xz plane at y = 0."""
    ticks = np.linspace(-0.5, 0.5, subdiv + 1)
    verts = np.array([[x, 0.0, z] for z in ticks for x in ticks])
    n = subdiv + 1
    tris = []
    for i in range(subdiv):
        for j in range(subdiv):
            v = i * n + j
            tris += [(v, v + n, v + 1), (v + 1, v + n, v + n + 1)]
    return verts, np.array(tris)


def surface_box(size, density: float, rng: np.random.Generator,
                subdiv: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Box of extent ``size`` rendered as a coarse grid, carrying extra surface points.

    Game meshes are far denser than what a desk-scale rasterizer wants to
    draw, so the triangles use only the grid vertices while about
    ``density`` points per unit area are scattered uniformly over each face.
    The scattered points are shuffled, so stride sampling thins them evenly.
    """
    size = np.asarray(size, dtype=float)
    verts, tris = grid_box(subdiv)
    pts = []
    for axis in range(3):
        a, b = (axis + 1) % 3, (axis + 2) % 3
        n = max(1, int(round(density * size[a] * size[b])))
        for sign in (-1.0, 1.0):
            p = np.empty((n, 3))
            p[:, axis] = 0.5 * sign
            p[:, a] = rng.uniform(-0.5, 0.5, n)
            p[:, b] = rng.uniform(-0.5, 0.5, n)
            pts.append(p)
    extra = np.concatenate(pts)
    rng.shuffle(extra)
    return np.concatenate([verts, extra]) * size, tris


def surface_plane(size: float, density: float, rng: np.random.Generator,
                  subdiv: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Square ground tile of side ``size`` in the xz plane with scattered surface points."""
    verts, tris = grid_plane(subdiv)
    n = max(1, int(round(density * size * size)))
    extra = np.zeros((n, 3))
    extra[:, 0] = rng.uniform(-0.5, 0.5, n)
    extra[:, 2] = rng.uniform(-0.5, 0.5, n)
    return np.concatenate([verts, extra]) * (size, 1.0, size), tris


BOX_DENSITY = 150.0
GROUND_DENSITY = 40.0


def _box_object(oid: int, color: int, center, size, rng: np.random.Generator,
                transforms=None) -> GameObject:
    verts, tris = surface_box(size, BOX_DENSITY, rng)
    return GameObject(oid, verts, tris, color, transforms or [translation(*center)])


def _proj(resolution) -> np.ndarray:
    W, H = resolution
    return perspective(60.0, W / H, 0.1, 100.0)


def _cluster(rng: np.random.Generator, count: int, spread: float) -> list[GameObject]:
    objs = []
    for i in range(count):
        cx, cz = rng.uniform(-spread, spread, size=2)
        sx, sy, sz = rng.uniform(0.8, 2.0, size=3)
        color = int(rng.integers(0, len(PALETTE)))
        objs.append(_box_object(i, color, (cx, sy / 2, cz), (sx, sy, sz), rng))
    return objs


def pan_scene(frames: int = 60, seed: int = 0, speed: float = 0.08) -> SceneModel:
    """Camera translates sideways at constant velocity in front of an object cluster."""
    rng = np.random.default_rng(seed)
    objs = _cluster(rng, 12, 4.0)
    proj = _proj(RGB_RESOLUTION)
    path = []
    for f in range(frames):
        x = -0.5 * speed * frames + speed * f
        path.append(CameraPose(look_at((x, 3.0, 11.0), (x, 0.5, 0.0)), proj, f))
    return SceneModel(objs, dict(PALETTE), path, RGB_RESOLUTION, STATE_RESOLUTION)


def orbit_scene(frames: int = 60, seed: int = 0, radius: float = 11.0,
                degrees_per_frame: float = 2.0) -> SceneModel:
    """Camera circles the object cluster while looking at its center."""
    rng = np.random.default_rng(seed)
    objs = _cluster(rng, 12, 3.5)
    proj = _proj(RGB_RESOLUTION)
    path = []
    for f in range(frames):
        a = math.radians(degrees_per_frame * f)
        eye = (radius * math.sin(a), 4.0, radius * math.cos(a))
        path.append(CameraPose(look_at(eye, (0.0, 0.5, 0.0)), proj, f))
    return SceneModel(objs, dict(PALETTE), path, RGB_RESOLUTION, STATE_RESOLUTION)


def two_motion_scene(frames: int = 60, seed: int = 0, step: float = 0.06) -> SceneModel:
    """Static camera; a left group slides along +x and a right group rises along +y."""
    rng = np.random.default_rng(seed)
    objs = []
    for i in range(8):
        left = i < 4
        cx = rng.uniform(-6.0, -2.5) if left else rng.uniform(2.5, 6.0)
        cz = rng.uniform(-2.0, 2.0)
        size = rng.uniform(0.8, 1.6, size=3)
        base = translation(cx, size[1] / 2, cz)
        transforms = []
        for f in range(frames):
            d = step * f
            offset = translation(d, 0.0, 0.0) if left else translation(0.0, d, 0.0)
            transforms.append(offset @ base)
        color = int(rng.integers(0, len(PALETTE)))
        verts, tris = surface_box(size, BOX_DENSITY, rng)
        objs.append(GameObject(i, verts, tris, color, transforms))
    proj = _proj(RGB_RESOLUTION)
    pose = look_at((0.0, 3.0, 13.0), (0.0, 1.0, 0.0))
    path = [CameraPose(pose, proj, f) for f in range(frames)]
    return SceneModel(objs, dict(PALETTE), path, RGB_RESOLUTION, STATE_RESOLUTION)


def village_toy(frames: int = 300, seed: int = 0) -> SceneModel:
    """40-object village: 4 ground tiles and 36 buildings, walked through by the camera.

    The camera follows :func:`player_walk`, a seeded stream of walk and
    turn inputs, so the screen motion mixes parallax with abrupt pans.
    """
    rng = np.random.default_rng(seed)
    objs: list[GameObject] = []
    for i, (cx, cz) in enumerate([(-8.0, -8.0), (8.0, -8.0), (-8.0, -24.0), (8.0, -24.0)]):
        plane_v, plane_t = surface_plane(16.0, GROUND_DENSITY, rng)
        objs.append(GameObject(i, plane_v, plane_t, 1 if i % 2 == 0 else 9, [translation(cx, 0.0, cz)]))
    oid = len(objs)
    for row in range(12):
        for side in (-1, 1):
            for lane in range(2 if row % 2 == 0 else 1):
                if oid >= 40:
                    break
                x = side * (3.0 + 3.5 * lane + rng.uniform(-0.5, 0.5))
                z = 2.0 - 2.8 * row + rng.uniform(-0.6, 0.6)
                w, h, d = rng.uniform(1.2, 2.4), rng.uniform(1.0, 3.5), rng.uniform(1.2, 2.4)
                color = int(rng.choice([0, 2, 3, 4, 5, 6, 7, 8, 10, 11]))
                rot = rotation_y(rng.uniform(-0.3, 0.3))
                verts, tris = surface_box((w, h, d), BOX_DENSITY, rng)
                T = translation(x, h / 2, z) @ rot
                objs.append(GameObject(oid, verts, tris, color, [T]))
                oid += 1
    proj = _proj(RGB_RESOLUTION)
    path = [CameraPose(view, proj, f) for f, view in enumerate(player_walk(frames, rng))]
    return SceneModel(objs, dict(PALETTE), path, RGB_RESOLUTION, STATE_RESOLUTION)


def player_walk(frames: int, rng: np.random.Generator, fps: float = 30.0) -> list[np.ndarray]:
    """View matrices for a player walking down the village street.

    Walk speed and turn rate are piecewise-constant inputs that change at
    random moments (mean hold about a quarter second). The camera follows
    them with a little inertia, so motion is smooth within a hold but not
    predictable across holds. Heading is pulled back toward -z so the walk
    stays on the street.
    """
    dt = 1.0 / fps
    x, z, yaw = 0.0, 8.0, 0.0
    speed, turn = 1.6, 0.0
    target_speed, target_turn = 1.6, 0.0
    views = []
    for _ in range(frames):
        if rng.random() < 1.0 / 8.0:
            target_speed = float(rng.uniform(0.0, 3.2))
            target_turn = float(rng.uniform(-1.2, 1.2)) - 2.5 * yaw
        speed += 0.5 * (target_speed - speed)
        turn += 0.5 * (target_turn - turn)
        yaw += turn * dt
        x += speed * dt * math.sin(yaw) - 0.05 * x
        z -= speed * dt * math.cos(yaw)
        eye = (x, 2.2, z)
        target = (x + 10.0 * math.sin(yaw), 1.2, z - 10.0 * math.cos(yaw))
        views.append(look_at(eye, target))
    return views


def make_scene(kind: str, frames: int | None = None, seed: int = 0) -> SceneModel:
    builders = {"pan": pan_scene, "orbit": orbit_scene, "two-motion": two_motion_scene,
                "village_toy": village_toy}
    if kind not in builders:
        raise ValueError(f"unknown scene kind {kind!r}; choose from {', '.join(SCENE_KINDS)}")
    kwargs = {"seed": seed}
    if frames is not None:
        kwargs["frames"] = frames
    return builders[kind](**kwargs)
