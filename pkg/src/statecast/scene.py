"""Synthetic game world: scene model, scene file format and ground-truth rendering.

Conventions: right-handed world, the camera looks down -z in view space,
matrices act on column vectors, NDC x/y lie in [-1, 1] and screen rows grow
downwards from the top-left corner. Screen position ``(sx, sy)`` is continuous;
pixel ``(x, y)`` covers ``[x, x+1) x [y, y+1)`` and is sampled at its center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

BACKGROUND = (128, 128, 128)
SUBPIXEL_BITS = 8
# triangles reaching beyond this many pixels are skipped to keep edge math in int64
GUARD_BAND_PX = float(1 << 20)


class SceneFormatError(ValueError):
    """Malformed scene file; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class SceneValidationError(ValueError):
    """A loaded scene violates a model invariant."""


# --- matrices -----------------------------------------------------------------

def perspective(fovy_deg: float, aspect: float, near: float, far: float) -> np.ndarray:
    f = 1.0 / math.tan(math.radians(fovy_deg) / 2.0)
    m = np.zeros((4, 4))
    m[0, 0] = f / aspect
    m[1, 1] = f
    m[2, 2] = (far + near) / (near - far)
    m[2, 3] = 2.0 * far * near / (near - far)
    m[3, 2] = -1.0
    return m


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd /= np.linalg.norm(fwd)
    side = np.cross(fwd, np.asarray(up, dtype=float))
    side /= np.linalg.norm(side)
    upv = np.cross(side, fwd)
    m = np.eye(4)
    m[0, :3], m[1, :3], m[2, :3] = side, upv, -fwd
    m[:3, 3] = -m[:3, :3] @ eye
    return m


def translation(x: float, y: float, z: float) -> np.ndarray:
    m = np.eye(4)
    m[:3, 3] = (x, y, z)
    return m


def rotation_y(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    m = np.eye(4)
    m[0, 0], m[0, 2], m[2, 0], m[2, 2] = c, s, -s, c
    return m


def scaling(sx: float, sy: float, sz: float) -> np.ndarray:
    return np.diag([sx, sy, sz, 1.0])


def near_far(proj: np.ndarray) -> tuple[float, float]:
    """Clip planes of a standard perspective matrix; (0, inf) for other matrices."""
    if proj[3, 2] == -1.0 and proj[3, 3] == 0.0:
        a, b = proj[2, 2], proj[2, 3]
        return b / (a - 1.0), b / (a + 1.0)
    return 0.0, math.inf


# --- model --------------------------------------------------------------------

@dataclass
class GameObject:
    id: int
    vertices: np.ndarray          # (n, 3) local space
    triangles: np.ndarray         # (m, 3) vertex indices
    color_index: int
    transforms: list[np.ndarray] = field(default_factory=lambda: [np.eye(4)])
    aabb: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.vertices.setflags(write=False)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.triangles.setflags(write=False)
        self.transforms = [np.asarray(t, dtype=np.float64).reshape(4, 4) for t in self.transforms]
        if self.aabb is None and len(self.vertices):
            self.aabb = (self.vertices.min(axis=0), self.vertices.max(axis=0))

    def transform_at(self, frame: int) -> np.ndarray:
        """Local-to-world matrix for ``frame``; the last record holds once exhausted."""
        return self.transforms[min(frame, len(self.transforms) - 1)]


@dataclass
class CameraPose:
    view: np.ndarray
    proj: np.ndarray
    frame_index: int


@dataclass
class SceneModel:
    objects: list[GameObject]
    palette: dict[int, tuple[int, int, int]]
    camera_path: list[CameraPose]
    rgb_resolution: tuple[int, int] = (480, 272)
    state_resolution: tuple[int, int] = (128, 64)

    def __post_init__(self):
        self.validate()

    @property
    def num_frames(self) -> int:
        return len(self.camera_path)

    def validate(self) -> None:
        if not self.camera_path:
            raise SceneValidationError("camera_path is empty")
        W, H = self.rgb_resolution
        w, h = self.state_resolution
        if min(W, H, w, h) <= 0:
            raise SceneValidationError("resolutions must be positive")
        if w > W or h > H:
            raise SceneValidationError("state resolution exceeds RGB resolution")
        for color in self.palette.values():
            if len(color) != 3 or not all(0 <= c <= 255 for c in color):
                raise SceneValidationError(f"palette color {color} outside 0..255")
        ids = set()
        for obj in self.objects:
            if obj.id in ids:
                raise SceneValidationError(f"duplicate object id {obj.id}")
            ids.add(obj.id)
            if obj.color_index not in self.palette:
                raise SceneValidationError(f"object {obj.id}: unknown color index {obj.color_index}")
            if not np.isfinite(obj.vertices).all():
                raise SceneValidationError(f"object {obj.id}: non-finite vertex")
            if len(obj.triangles) and (obj.triangles.min() < 0 or obj.triangles.max() >= len(obj.vertices)):
                raise SceneValidationError(f"object {obj.id}: triangle index out of range")
            if obj.aabb is not None and len(obj.vertices):
                lo, hi = obj.aabb
                if (obj.vertices < lo - 1e-9).any() or (obj.vertices > hi + 1e-9).any():
                    raise SceneValidationError(f"object {obj.id}: aabb does not enclose vertices")
            for t in obj.transforms:
                if not np.isfinite(t).all():
                    raise SceneValidationError(f"object {obj.id}: non-finite transform")
        for i, pose in enumerate(self.camera_path):
            if not (np.isfinite(pose.view).all() and np.isfinite(pose.proj).all()):
                raise SceneValidationError(f"camera {i}: non-finite matrix")
            if abs(np.linalg.det(pose.proj)) < 1e-12:
                raise SceneValidationError(f"camera {i}: projection matrix is singular")

    def check_frame(self, frame: int) -> None:
        if not 0 <= frame < len(self.camera_path):
            raise IndexError(f"frame {frame} out of range 0..{len(self.camera_path) - 1}")


# --- scene file -----------------------------------------------------------------

def _floats(tokens: list[str], count: int, lineno: int) -> list[float]:
    if len(tokens) != count:
        raise SceneFormatError(lineno, f"expected {count} numbers, got {len(tokens)}")
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise SceneFormatError(lineno, str(exc)) from None
    if not all(math.isfinite(v) for v in values):
        raise SceneFormatError(lineno, "non-finite number")
    return values


def _ints(tokens: list[str], count: int, lineno: int) -> list[int]:
    if len(tokens) != count:
        raise SceneFormatError(lineno, f"expected {count} integers, got {len(tokens)}")
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise SceneFormatError(lineno, str(exc)) from None


def parse_scene(text: str) -> SceneModel:
    palette: dict[int, tuple[int, int, int]] = {}
    objects: list[dict] = []
    cameras: list[CameraPose] = []
    resolution = None
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if key == "palette":
            idx, r, g, b = _ints(rest, 4, lineno)
            palette[idx] = (r, g, b)
        elif key == "object":
            oid, cidx = _ints(rest, 2, lineno)
            current = {"id": oid, "color_index": cidx, "v": [], "t": [], "T": [], "aabb": None}
            objects.append(current)
        elif key in ("v", "t", "T", "aabb"):
            if current is None:
                raise SceneFormatError(lineno, f"'{key}' record outside an object")
            if key == "v":
                current["v"].append(_floats(rest, 3, lineno))
            elif key == "t":
                current["t"].append(_ints(rest, 3, lineno))
            elif key == "T":
                current["T"].append(np.array(_floats(rest, 16, lineno)).reshape(4, 4))
            else:
                vals = _floats(rest, 6, lineno)
                current["aabb"] = (np.array(vals[:3]), np.array(vals[3:]))
        elif key == "camera":
            vals = _floats(rest, 32, lineno)
            cameras.append(CameraPose(np.array(vals[:16]).reshape(4, 4),
                                      np.array(vals[16:]).reshape(4, 4), len(cameras)))
        elif key == "resolution":
            resolution = _ints(rest, 4, lineno)
        else:
            raise SceneFormatError(lineno, f"unknown record '{key}'")
    if resolution is None:
        raise SceneFormatError(0, "missing 'resolution' record")
    built = [GameObject(id=o["id"], vertices=np.array(o["v"], dtype=float).reshape(-1, 3),
                        triangles=np.array(o["t"], dtype=np.int64).reshape(-1, 3),
                        color_index=o["color_index"],
                        transforms=o["T"] or [np.eye(4)], aabb=o["aabb"])
             for o in objects]
    W, H, w, h = resolution
    return SceneModel(built, palette, cameras, (W, H), (w, h))


def load_scene(path: str | Path) -> SceneModel:
    return parse_scene(Path(path).read_text())


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values).ravel())


def dump_scene(scene: SceneModel) -> str:
    W, H = scene.rgb_resolution
    w, h = scene.state_resolution
    lines = ["# statecast scene", f"resolution {W} {H} {w} {h}"]
    for idx in sorted(scene.palette):
        r, g, b = scene.palette[idx]
        lines.append(f"palette {idx} {r} {g} {b}")
    for obj in scene.objects:
        lines.append(f"object {obj.id} {obj.color_index}")
        lines.extend(f"T {_fmt(t)}" for t in obj.transforms)
        lines.extend(f"v {_fmt(v)}" for v in obj.vertices)
        lines.extend("t {} {} {}".format(*tri) for tri in obj.triangles)
    for pose in scene.camera_path:
        lines.append(f"camera {_fmt(pose.view)} {_fmt(pose.proj)}")
    return "\n".join(lines) + "\n"


def save_scene(scene: SceneModel, path: str | Path) -> None:
    Path(path).write_text(dump_scene(scene))


# --- rendering --------------------------------------------------------------------

def ndc_to_screen(ndc_x, ndc_y, width: int, height: int):
    return (ndc_x + 1.0) * 0.5 * width, (1.0 - ndc_y) * 0.5 * height


def _clip_near(poly: list[np.ndarray], near: float) -> list[np.ndarray]:
    """Sutherland-Hodgman against the view-space plane z = -near (keeps z <= -near)."""
    out = []
    for i, cur in enumerate(poly):
        nxt = poly[(i + 1) % len(poly)]
        cur_in, nxt_in = -cur[2] >= near, -nxt[2] >= near
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (-near - cur[2]) / (nxt[2] - cur[2])
            out.append(cur + t * (nxt - cur))
    return out


def triangle_soup(scene: SceneModel, frame: int):
    """Screen-space triangles for ``frame``.

    Returns ``(xy, inv_depth, colors)``: fixed-point screen coordinates with
    ``SUBPIXEL_BITS`` fractional bits, per-vertex reciprocal view depth, and
    the flat shaded color of each triangle, in scene drawing order.
    """
    scene.check_frame(frame)
    pose = scene.camera_path[frame]
    W, H = scene.rgb_resolution
    near, far = near_far(pose.proj)
    near = max(near, 1e-6)
    scale = float(1 << SUBPIXEL_BITS)
    xy_parts, iz_parts, col_parts = [], [], []
    for obj in scene.objects:
        if not len(obj.triangles):
            continue
        mv = pose.view @ obj.transform_at(frame)
        verts = np.c_[obj.vertices, np.ones(len(obj.vertices))]
        view = verts @ mv.T
        base = np.asarray(scene.palette[obj.color_index], dtype=np.float64)
        pts = view[obj.triangles]                             # (m, 3, 4)
        depth = -pts[..., 2]
        if math.isfinite(far):
            factor = np.clip(1.0 - depth.mean(axis=1) / far, 0.2, 1.0)
        else:
            factor = np.ones(len(pts))
        colors = np.floor(base[None, :] * factor[:, None] + 0.5).astype(np.uint8)
        front = (depth >= near).all(axis=1)
        partial = ~front & (depth >= near).any(axis=1)
        tris, cols = [pts[front]], [colors[front]]
        for t in np.flatnonzero(partial):
            poly = _clip_near(list(pts[t]), near)
            fan = [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]
            tris.append(np.array(fan).reshape(-1, 3, 4))
            cols.append(np.repeat(colors[t:t + 1], len(fan), axis=0))
        pts = np.concatenate(tris)
        colors = np.concatenate(cols)
        if not len(pts):
            continue
        clip = pts @ pose.proj.T
        ndc = clip[..., :2] / clip[..., 3:4]
        sx, sy = ndc_to_screen(ndc[..., 0], ndc[..., 1], W, H)
        keep = (np.abs(sx) < GUARD_BAND_PX).all(axis=1) & (np.abs(sy) < GUARD_BAND_PX).all(axis=1)
        xy = np.stack([np.rint(sx * scale), np.rint(sy * scale)], axis=-1).astype(np.int64)
        xy_parts.append(xy[keep])
        iz_parts.append((1.0 / -pts[..., 2])[keep])
        col_parts.append(colors[keep])
    if not xy_parts:
        return (np.zeros((0, 3, 2), np.int64), np.zeros((0, 3)), np.zeros((0, 3), np.uint8))
    return (np.ascontiguousarray(np.concatenate(xy_parts)),
            np.ascontiguousarray(np.concatenate(iz_parts)),
            np.ascontiguousarray(np.concatenate(col_parts)))


def render_ground_truth(scene: SceneModel, frame: int, backend=None) -> np.ndarray:
    """Flat-shaded, z-buffered RGB frame (HxWx3 uint8) for ``frame``."""
    xy, inv_depth, colors = triangle_soup(scene, frame)
    W, H = scene.rgb_resolution
    image = np.empty((H, W, 3), dtype=np.uint8)
    image[:] = BACKGROUND
    zbuf = np.zeros((H, W), dtype=np.float64)
    rasterize = (backend or kernels).rasterize
    rasterize(xy, inv_depth, colors, image, zbuf, SUBPIXEL_BITS)
    return image
