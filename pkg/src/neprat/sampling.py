"""Sample sets and the region primitives used to discretize approximation domains."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSamplesError


@dataclass
class SampleSet:
    """An ordered discretization of an approximation region.

    ``active_mask`` tracks which points are still candidates for greedy
    support selection; fitting routines work on a copy and never mutate a
    caller's set.
    """

    points: np.ndarray
    active_mask: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).ravel()
        if self.points.size < 2:
            raise InvalidSamplesError("sample set needs at least 2 points")
        if self.active_mask is None:
            self.active_mask = np.ones(self.points.size, dtype=bool)
        else:
            self.active_mask = np.asarray(self.active_mask, dtype=bool).ravel()
            if self.active_mask.size != self.points.size:
                raise InvalidSamplesError("active_mask length mismatch")
        if len(np.unique(self.points)) != self.points.size:
            raise InvalidSamplesError("sample points must be pairwise distinct")

    def __len__(self):
        return self.points.size

    @property
    def num_active(self):
        return int(self.active_mask.sum())


def dedupe_points(points):
    """Drop duplicate complex points, keeping first occurrences in order."""
    points = np.asarray(points, dtype=complex).ravel()
    seen = {}
    for p in points:
        seen.setdefault(complex(p), None)
    return np.array(list(seen.keys()), dtype=complex)


def _halfdisk_boundary(center, radius, count):
    # closed boundary = semicircular arc plus the diameter segment,
    # points equispaced by arclength along the whole perimeter
    perim = np.pi * radius + 2.0 * radius
    t = (np.arange(count) + 0.5) / count * perim
    pts = np.where(
        t < np.pi * radius,
        center + radius * np.exp(1j * t / radius),
        center - radius + (t - np.pi * radius),
    )
    return pts.astype(complex)


def _rectangle_boundary(x0, x1, y0, y1, count):
    w, h = x1 - x0, y1 - y0
    perim = 2.0 * (w + h)
    t = (np.arange(count) + 0.5) / count * perim
    pts = np.empty(count, dtype=complex)
    for i, ti in enumerate(t):
        if ti < w:
            pts[i] = x0 + ti + 1j * y0
        elif ti < w + h:
            pts[i] = x1 + 1j * (y0 + (ti - w))
        elif ti < 2 * w + h:
            pts[i] = x1 - (ti - w - h) + 1j * y1
        else:
            pts[i] = x0 + 1j * (y1 - (ti - 2 * w - h))
    return pts


@dataclass
class Region:
    """Geometric region of the complex plane with a seeded sampling recipe.

    Supported kinds:
      * ``interval``  -- real segment [a, b]; equidistant samples.
      * ``rectangle`` -- axis-aligned, given by two opposite corners; uniform
        random interior points plus boundary points equispaced by arclength.
      * ``halfdisk``  -- upper half disk given by (real center, radius);
        uniform random interior plus equispaced boundary.
      * ``points``    -- explicit list of sample points.
    """

    kind: str
    bounds: tuple = ()
    samples_interior: int = 0
    samples_boundary: int = 0
    seed: int = 0
    explicit_points: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle", "halfdisk", "points"):
            raise InvalidSamplesError(f"unknown region kind {self.kind!r}")
        if self.kind == "points":
            if self.explicit_points is None:
                raise InvalidSamplesError("points region needs explicit_points")
            self.explicit_points = np.asarray(self.explicit_points, dtype=complex).ravel()

    # -- geometry -----------------------------------------------------------

    @property
    def diameter(self):
        if self.kind == "interval":
            a, b = self.bounds
            return float(b - a)
        if self.kind == "rectangle":
            c0, c1 = complex(self.bounds[0]), complex(self.bounds[1])
            return abs(c1 - c0)
        if self.kind == "halfdisk":
            return 2.0 * float(self.bounds[1])
        pts = self.explicit_points
        lo = complex(pts.real.min(), pts.imag.min())
        hi = complex(pts.real.max(), pts.imag.max())
        return max(abs(hi - lo), 1.0)

    def contains(self, z, pad=0.0):
        """Whether z lies in the region, with a halo of absolute width ``pad``."""
        z = complex(z)
        if self.kind == "interval":
            a, b = self.bounds
            return a - pad <= z.real <= b + pad and abs(z.imag) <= pad
        if self.kind == "rectangle":
            c0, c1 = complex(self.bounds[0]), complex(self.bounds[1])
            x0, x1 = min(c0.real, c1.real), max(c0.real, c1.real)
            y0, y1 = min(c0.imag, c1.imag), max(c0.imag, c1.imag)
            return x0 - pad <= z.real <= x1 + pad and y0 - pad <= z.imag <= y1 + pad
        if self.kind == "halfdisk":
            center, radius = self.bounds
            return abs(z - center) <= radius + pad and z.imag >= -pad
        return np.min(np.abs(self.explicit_points - z)) <= pad

    @property
    def interval_bounds(self):
        """Real bounds usable as a Chebyshev-basis interval."""
        if self.kind == "interval":
            return float(self.bounds[0]), float(self.bounds[1])
        if self.kind == "rectangle":
            c0, c1 = complex(self.bounds[0]), complex(self.bounds[1])
            return min(c0.real, c1.real), max(c0.real, c1.real)
        if self.kind == "halfdisk":
            center, radius = self.bounds
            return center - radius, center + radius
        pts = self.explicit_points
        return float(pts.real.min()), float(pts.real.max())

    # -- sampling -----------------------------------------------------------

    def _draw(self, n_interior, n_boundary, seed):
        rng = np.random.default_rng(seed)
        if self.kind == "interval":
            a, b = self.bounds
            count = max(n_interior + n_boundary, 2)
            return np.linspace(a, b, count).astype(complex)
        if self.kind == "rectangle":
            c0, c1 = complex(self.bounds[0]), complex(self.bounds[1])
            x0, x1 = min(c0.real, c1.real), max(c0.real, c1.real)
            y0, y1 = min(c0.imag, c1.imag), max(c0.imag, c1.imag)
            interior = (x0 + (x1 - x0) * rng.random(n_interior)) + 1j * (
                y0 + (y1 - y0) * rng.random(n_interior)
            )
            parts = [interior]
            if n_boundary:
                parts.append(_rectangle_boundary(x0, x1, y0, y1, n_boundary))
            return dedupe_points(np.concatenate(parts))
        if self.kind == "halfdisk":
            center, radius = self.bounds
            u = rng.random(n_interior)
            v = rng.random(n_interior)
            interior = center + radius * np.sqrt(u) * np.exp(1j * np.pi * v)
            parts = [interior]
            if n_boundary:
                parts.append(_halfdisk_boundary(center, radius, n_boundary))
            return dedupe_points(np.concatenate(parts))
        return dedupe_points(self.explicit_points)

    def sample_points(self):
        """The region's fitting discretization (deterministic for a fixed seed)."""
        return self._draw(self.samples_interior, self.samples_boundary, self.seed)

    def sample_set(self):
        return SampleSet(self.sample_points())

    def test_points(self, count, seed=None):
        """Fresh points for error reporting, independent of the fit samples."""
        seed = self.seed + 1 if seed is None else seed
        if self.kind == "points":
            rng = np.random.default_rng(seed)
            idx = rng.integers(0, self.explicit_points.size, size=count)
            return self.explicit_points[idx]
        if self.kind == "interval":
            a, b = self.bounds
            rng = np.random.default_rng(seed)
            return (a + (b - a) * rng.random(count)).astype(complex)
        pts = self._draw(count, 0, seed)
        return pts[:count]
