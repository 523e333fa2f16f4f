"""Game-state extraction: frustum culling, MVP projection, depth filtering and colorization.

A game state is a sparse low-resolution image holding, per cell, the color
index and view depth of the nearest projected vertex. It is computed from
object vertices and camera matrices alone, without rasterizing anything.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pnm import read_pgm, write_pgm
from .scene import SceneModel, ndc_to_screen

EMPTY = -1


@dataclass
class GameStateFrame:
    color_index: np.ndarray   # (h, w) int, EMPTY where unoccupied
    depth: np.ndarray         # (h, w) float, 0 where unoccupied
    frame_index: int
    downsample: int = 1

    @property
    def width(self) -> int:
        return self.color_index.shape[1]

    @property
    def height(self) -> int:
        return self.color_index.shape[0]

    @property
    def occupied(self) -> np.ndarray:
        return self.color_index != EMPTY

    def __eq__(self, other):
        if not isinstance(other, GameStateFrame):
            return NotImplemented
        return (np.array_equal(self.color_index, other.color_index)
                and np.array_equal(self.depth, other.depth))


@dataclass(frozen=True)
class VisibilitySet:
    frame_index: int
    visible_object_ids: frozenset[int]


def _corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.array([[x, y, z, 1.0] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])


def frustum_cull(scene: SceneModel, frame: int) -> VisibilitySet:
    """Keep every object whose bounding box is not entirely outside one frustum plane.

    Only the four side planes and the camera plane (clip w > 0) are tested, so
    the test is conservative: a box straddling any plane is kept.
    """
    scene.check_frame(frame)
    pose = scene.camera_path[frame]
    vp = pose.proj @ pose.view
    visible = set()
    for obj in scene.objects:
        if obj.aabb is None:
            continue
        clip = _corners(*obj.aabb) @ (vp @ obj.transform_at(frame)).T
        x, y, w = clip[:, 0], clip[:, 1], clip[:, 3]
        outside = ((x < -w).all() or (x > w).all() or (y < -w).all() or (y > w).all()
                   or (w <= 0).all())
        if not outside:
            visible.add(obj.id)
    return VisibilitySet(frame, frozenset(visible))


def project_vertices(scene: SceneModel, frame: int, obj, stride: int = 1):
    """Screen position, view depth and on-screen flag for every ``stride``-th vertex."""
    pose = scene.camera_path[frame]
    mvp = pose.proj @ pose.view @ obj.transform_at(frame)
    mv = pose.view @ obj.transform_at(frame)
    verts = obj.vertices[::stride]
    homo = np.c_[verts, np.ones(len(verts))]
    clip = homo @ mvp.T
    depth = -(homo @ mv.T)[:, 2]
    w = clip[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc = clip[:, :2] / w[:, None]
    onscreen = (w > 0) & (depth > 0) & (np.abs(ndc) <= 1.0).all(axis=1)
    return ndc, depth, onscreen


def extract_state(scene: SceneModel, frame: int, k: int = 5,
                  resolution: tuple[int, int] | None = None) -> GameStateFrame:
    if k < 1:
        raise ValueError("downsample ratio must be >= 1")
    w, h = resolution or scene.state_resolution
    if w < 8 or h < 8:
        raise ValueError(f"state resolution {w}x{h} below 8x8")
    scene.check_frame(frame)
    vis = frustum_cull(scene, frame)
    cols, rows, depths, colors = [], [], [], []
    for obj in scene.objects:
        if obj.id not in vis.visible_object_ids:
            continue
        ndc, depth, onscreen = project_vertices(scene, frame, obj, k)
        if not onscreen.any():
            continue
        sx, sy = ndc_to_screen(ndc[onscreen, 0], ndc[onscreen, 1], w, h)
        cx = np.floor(sx).astype(np.int64)
        cy = np.floor(sy).astype(np.int64)
        inside = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        cols.append(cx[inside])
        rows.append(cy[inside])
        depths.append(depth[onscreen][inside])
        colors.append(np.full(int(inside.sum()), obj.color_index, dtype=np.int64))
    color_index = np.full((h, w), EMPTY, dtype=np.int64)
    depth_map = np.zeros((h, w), dtype=np.float64)
    if cols:
        cx, cy = np.concatenate(cols), np.concatenate(rows)
        d, c = np.concatenate(depths), np.concatenate(colors)
        cell = cy * w + cx
        # nearest first per cell; stable sort keeps drawing order on exact ties
        order = np.lexsort((d, cell))
        first = np.ones(len(order), dtype=bool)
        first[1:] = cell[order][1:] != cell[order][:-1]
        win = order[first]
        color_index.ravel()[cell[win]] = c[win]
        depth_map.ravel()[cell[win]] = d[win]
    return GameStateFrame(color_index, depth_map, frame, k)


def state_to_image(state: GameStateFrame, palette: dict[int, tuple[int, int, int]]) -> np.ndarray:
    image = np.zeros((state.height, state.width, 3), dtype=np.uint8)
    for idx in np.unique(state.color_index[state.occupied]):
        image[state.color_index == idx] = palette[int(idx)]
    return image


def write_state(state: GameStateFrame, pgm_path: str | Path, depth_path: str | Path | None = None) -> None:
    """Color indices to PGM (0 empty, index+1 otherwise) plus a float32 LE depth sidecar."""
    if state.color_index.max(initial=EMPTY) > 254:
        raise ValueError("color index too large for an 8-bit state image")
    write_pgm(pgm_path, (state.color_index + 1).astype(np.uint8))
    if depth_path is None:
        depth_path = Path(pgm_path).with_suffix(".depth")
    state.depth.astype("<f4").tofile(depth_path)


def read_state(pgm_path: str | Path, depth_path: str | Path | None = None,
               frame_index: int = 0, downsample: int = 1) -> GameStateFrame:
    cells = read_pgm(pgm_path).astype(np.int64) - 1
    if depth_path is None:
        depth_path = Path(pgm_path).with_suffix(".depth")
    depth = np.fromfile(depth_path, dtype="<f4").astype(np.float64).reshape(cells.shape)
    return GameStateFrame(cells, depth, frame_index, downsample)
