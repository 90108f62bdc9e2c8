# SPDX-License-Identifier: GPL-3.0-or-later
# DepthLab – diffusion-based refinement of monocular depth estimates
# Copyright © 2025 The DepthLab Authors
#
# This file is part of DepthLab.
# DepthLab is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# DepthLab is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this file.  If not, see <https://www.gnu.org/licenses/>.
#
# ------------------------------------------------------------------------------------------------------------------------
#
# Procedural (image, depth) scenes: a pinhole camera at the origin looking down +z, a fronto-parallel background
# plane, and a few analytic primitives (tilted discs, spheres, axis-aligned boxes) placed from a counter-based seed.
#
# Camera ray of pixel (i, j):  d = ((j + 0.5 - cx) / f, (i + 0.5 - cy) / f, 1)
# Because d_z = 1, the ray parameter t of the first hit is the depth along the optical axis.
#

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from numba import jit

from depth_io.rasters import DepthMap, DepthUnits, ImageMap
from utils.exceptions import ConfigError, FormatError
from utils.seeding import UniformStream, derive_seed

PRIMITIVE_KINDS = ("plane", "sphere", "box")
_KIND_CODES = {"sphere": 0, "plane": 1, "box": 2}

# Placement ranges (camera units)
DEPTH_RANGE = (3.0, 6.5)
SIZE_RANGE = (0.4, 1.2)
ALBEDO_RANGE = (0.25, 1.0)
MAX_TILT = 0.6
FRUSTUM_FILL = 0.8

# Shading
LIGHT_DIRECTION = (0.3, -0.5, -1.0)  # surface -> light, normalized at render time
AMBIENT = 0.2
BACKGROUND_ALBEDO = (0.5, 0.5, 0.5)

# Row layout of the primitive table: kind, center (3), size, axis (3), albedo (3)
_ROW_WIDTH = 11


@dataclass(frozen=True)
class SceneSpec:
    """
    Parameters of a family of procedural scenes. Identical specs produce bit-identical samples.

    ``focal`` defaults to the raster width (about 53 degrees horizontal field of view) and the principal point to
    the raster center.
    """

    seed: int = 0
    height: int = 64
    width: int = 64
    n_primitives: int = 4
    kinds: Tuple[str, ...] = PRIMITIVE_KINDS
    focal: float = 0.0
    cx: float = -1.0
    cy: float = -1.0
    background_depth: float = 8.0

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ConfigError(f"Raster size must be positive, got {self.height}x{self.width}")
        if self.n_primitives < 0:
            raise ConfigError(f"n_primitives must be >= 0, got {self.n_primitives}")
        kinds = tuple(self.kinds)
        unknown = [k for k in kinds if k not in PRIMITIVE_KINDS]
        if not kinds or unknown:
            raise ConfigError(f"Primitive kinds must be a non-empty subset of {PRIMITIVE_KINDS}, got {kinds}")
        if self.background_depth <= DEPTH_RANGE[1] + SIZE_RANGE[1]:
            raise ConfigError(f"background_depth must exceed {DEPTH_RANGE[1] + SIZE_RANGE[1]}")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "focal", float(self.focal) if self.focal > 0 else float(self.width))
        object.__setattr__(self, "cx", float(self.cx) if self.cx >= 0 else self.width / 2.0)
        object.__setattr__(self, "cy", float(self.cy) if self.cy >= 0 else self.height / 2.0)

    def describe(self) -> str:
        """One-line ``key=value`` description, as written into manifest headers."""
        return (
            f"seed={self.seed} height={self.height} width={self.width} n_primitives={self.n_primitives} "
            f"kinds={','.join(self.kinds)} focal={self.focal!r} cx={self.cx!r} cy={self.cy!r} "
            f"background_depth={self.background_depth!r}"
        )

    @classmethod
    def parse(cls, text: str) -> "SceneSpec":
        """
        Inverse of :meth:`describe`.

        :raises FormatError: If a field is missing or malformed.
        """
        values: Dict[str, str] = {}
        for token in text.split():
            if "=" not in token:
                raise FormatError(f"Malformed scene spec token {token!r}")
            key, value = token.split("=", 1)
            values[key] = value
        try:
            return cls(
                seed=int(values["seed"]),
                height=int(values["height"]),
                width=int(values["width"]),
                n_primitives=int(values["n_primitives"]),
                kinds=tuple(values["kinds"].split(",")),
                focal=float(values["focal"]),
                cx=float(values["cx"]),
                cy=float(values["cy"]),
                background_depth=float(values["background_depth"]),
            )
        except (KeyError, ValueError) as e:
            raise FormatError(f"Malformed scene spec {text!r}: {e}")


@dataclass(frozen=True)
class Primitive:
    """
    One analytic primitive.

    ``size`` is the radius for spheres and discs. ``axis`` is the unit normal of a disc or the half extents of a box.
    """

    kind: str
    center: Tuple[float, float, float]
    size: float = 1.0
    axis: Tuple[float, float, float] = (0.0, 0.0, -1.0)
    albedo: Tuple[float, float, float] = (0.8, 0.8, 0.8)

    @classmethod
    def sphere(cls, center: Sequence[float], radius: float, albedo: Sequence[float] = (0.8, 0.8, 0.8)) -> "Primitive":
        return cls("sphere", tuple(center), radius, (0.0, 0.0, 0.0), tuple(albedo))  # type: ignore[arg-type]

    def to_row(self) -> np.ndarray:
        if self.kind not in _KIND_CODES:
            raise ConfigError(f"Unknown primitive kind {self.kind!r}")
        row = np.zeros(_ROW_WIDTH, dtype=np.float64)
        row[0] = _KIND_CODES[self.kind]
        row[1:4] = self.center
        row[4] = self.size
        row[5:8] = self.axis
        row[8:11] = self.albedo
        return row


@dataclass(frozen=True)
class SceneSample:
    """A rendered (image, depth) pair; depth is metric, dense and strictly positive."""

    image: ImageMap
    depth: DepthMap
    index: int = 0
    primitives: List[Primitive] = field(default_factory=list)


@jit(nopython=True, cache=True, nogil=True)
def _raycast(
    table: np.ndarray,
    height: int,
    width: int,
    focal: float,
    cx: float,
    cy: float,
    background_depth: float,
    light: np.ndarray,
    background_albedo: np.ndarray,
    ambient: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cast one ray per pixel against every primitive and the background plane.

    :return: ``(depth (H, W), image (H, W, 3))`` as float64.
    """
    depth = np.empty((height, width), dtype=np.float64)
    image = np.empty((height, width, 3), dtype=np.float64)
    n_prims = table.shape[0]

    for i in range(height):
        dy = (i + 0.5 - cy) / focal
        for j in range(width):
            dx = (j + 0.5 - cx) / focal
            best_t = background_depth
            nx, ny, nz = 0.0, 0.0, -1.0
            ar, ag, ab = background_albedo[0], background_albedo[1], background_albedo[2]

            for k in range(n_prims):
                kind = int(table[k, 0])
                px, py, pz = table[k, 1], table[k, 2], table[k, 3]
                size = table[k, 4]
                t = -1.0
                hx, hy, hz = 0.0, 0.0, 0.0

                if kind == 0:
                    # Sphere: |t d - p|^2 = r^2
                    a = dx * dx + dy * dy + 1.0
                    b = -2.0 * (dx * px + dy * py + pz)
                    c = px * px + py * py + pz * pz - size * size
                    disc = b * b - 4.0 * a * c
                    if disc >= 0.0:
                        t0 = (-b - np.sqrt(disc)) / (2.0 * a)
                        if t0 > 1e-9:
                            t = t0
                            hx = (t * dx - px) / size
                            hy = (t * dy - py) / size
                            hz = (t - pz) / size
                elif kind == 1:
                    # Disc: plane through p with normal n, clipped to radius r
                    ux, uy, uz = table[k, 5], table[k, 6], table[k, 7]
                    denom = dx * ux + dy * uy + uz
                    if abs(denom) > 1e-12:
                        t0 = (px * ux + py * uy + pz * uz) / denom
                        if t0 > 1e-9:
                            qx, qy, qz = t0 * dx - px, t0 * dy - py, t0 - pz
                            if qx * qx + qy * qy + qz * qz <= size * size:
                                t = t0
                                sign = -1.0 if denom > 0.0 else 1.0
                                hx, hy, hz = sign * ux, sign * uy, sign * uz
                else:
                    # Axis-aligned box, slab method
                    t_near = -1e300
                    t_far = 1e300
                    axis_near = -1
                    missed = False
                    for ax in range(3):
                        d_ax = dx if ax == 0 else (dy if ax == 1 else 1.0)
                        lo = table[k, 1 + ax] - table[k, 5 + ax]
                        hi = table[k, 1 + ax] + table[k, 5 + ax]
                        if abs(d_ax) < 1e-12:
                            if lo > 0.0 or hi < 0.0:
                                missed = True
                            continue
                        ta = lo / d_ax
                        tb = hi / d_ax
                        if ta > tb:
                            ta, tb = tb, ta
                        if ta > t_near:
                            t_near = ta
                            axis_near = ax
                        if tb < t_far:
                            t_far = tb
                    if not missed and axis_near >= 0 and t_near <= t_far and t_near > 1e-9:
                        t = t_near
                        d_near = dx if axis_near == 0 else (dy if axis_near == 1 else 1.0)
                        s = -1.0 if d_near > 0.0 else 1.0
                        hx = s if axis_near == 0 else 0.0
                        hy = s if axis_near == 1 else 0.0
                        hz = s if axis_near == 2 else 0.0

                if t > 0.0 and t < best_t:
                    best_t = t
                    nx, ny, nz = hx, hy, hz
                    ar, ag, ab = table[k, 8], table[k, 9], table[k, 10]

            lambert = nx * light[0] + ny * light[1] + nz * light[2]
            if lambert < 0.0:
                lambert = 0.0
            shade = ambient + (1.0 - ambient) * lambert
            depth[i, j] = best_t
            image[i, j, 0] = ar * shade
            image[i, j, 1] = ag * shade
            image[i, j, 2] = ab * shade

    return depth, image


def place_primitives(spec: SceneSpec, index: int) -> List[Primitive]:
    """
    Draw the primitives of sample ``index`` from the stream ``derive_seed(spec.seed, index)``.

    Centers lie inside the central part of the view frustum, at depths in ``DEPTH_RANGE``, so every primitive sits
    strictly between the camera and the background plane.
    """
    stream = UniformStream(derive_seed(spec.seed, index))
    half_w = FRUSTUM_FILL * (spec.width / 2.0) / spec.focal
    half_h = FRUSTUM_FILL * (spec.height / 2.0) / spec.focal
    primitives = []
    for _ in range(spec.n_primitives):
        kind = spec.kinds[stream.integer(len(spec.kinds))]
        z = stream.next(*DEPTH_RANGE)
        x = stream.next(-half_w, half_w) * z
        y = stream.next(-half_h, half_h) * z
        size = stream.next(*SIZE_RANGE)
        albedo = (stream.next(*ALBEDO_RANGE), stream.next(*ALBEDO_RANGE), stream.next(*ALBEDO_RANGE))
        if kind == "plane":
            tilt = np.array([stream.next(-MAX_TILT, MAX_TILT), stream.next(-MAX_TILT, MAX_TILT), -1.0])
            axis = tuple(float(v) for v in tilt / np.sqrt(np.dot(tilt, tilt)))
        elif kind == "box":
            axis = (size * stream.next(0.6, 1.0), size * stream.next(0.6, 1.0), size * stream.next(0.6, 1.0))
        else:
            axis = (0.0, 0.0, 0.0)
        primitives.append(Primitive(kind, (x, y, z), size, axis, albedo))  # type: ignore[arg-type]
    return primitives


def render_scene(primitives: Sequence[Primitive], spec: SceneSpec, index: int = 0) -> SceneSample:
    """
    Render an explicit list of primitives with the camera and background of ``spec``.

    :param primitives: Primitives to ray-cast; may be empty.
    :param spec: Camera, raster size and background depth.
    :param index: Index recorded on the sample.
    :return: Shaded image and metric depth.
    """
    if primitives:
        table = np.stack([p.to_row() for p in primitives])
    else:
        table = np.zeros((0, _ROW_WIDTH), dtype=np.float64)
    light = np.asarray(LIGHT_DIRECTION, dtype=np.float64)
    light = light / np.sqrt(np.dot(light, light))
    depth, image = _raycast(
        table,
        spec.height,
        spec.width,
        spec.focal,
        spec.cx,
        spec.cy,
        spec.background_depth,
        light,
        np.asarray(BACKGROUND_ALBEDO, dtype=np.float64),
        AMBIENT,
    )
    return SceneSample(
        image=ImageMap(values=np.clip(image, 0.0, 1.0)),
        depth=DepthMap.dense(depth, units=DepthUnits.METRIC),
        index=index,
        primitives=list(primitives),
    )


def generate_sample(spec: SceneSpec, index: int) -> SceneSample:
    """
    Render sample ``index`` of the scene family ``spec``. Deterministic in ``(spec, index)``.

    :param spec: Scene family.
    :param index: Sample index, ``>= 0``.
    :return: Lambertian-shaded image and metric depth, all pixels valid.
    """
    if index < 0:
        raise ConfigError(f"Sample index must be >= 0, got {index}")
    return render_scene(place_primitives(spec, index), spec, index=index)
