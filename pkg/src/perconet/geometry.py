"""Domains, uniform sampling and cell grids shared by every other module.

Points are plain float64 numpy arrays of shape (d,); batches are (n, d).
Domains are convex and compact by construction (closed disk or closed
axis-aligned rectangle), which the mobility model relies on: a straight
segment between two points of the domain stays inside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Closed convex domain: a disk or an axis-aligned rectangle.

    kind is "disk" (center, radius) or "rect" (lower, upper).  Immutable and
    safe for concurrent reads.
    """

    kind: str
    center: np.ndarray | None = None
    radius: float = 0.0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "disk":
            center = np.asarray(self.center, dtype=float)
            if not np.all(np.isfinite(center)):
                raise ValueError("disk center must be finite")
            if not (self.radius > 0):
                raise ValueError("disk radius must be > 0")
            object.__setattr__(self, "center", center)
        elif self.kind == "rect":
            lower = np.asarray(self.lower, dtype=float)
            upper = np.asarray(self.upper, dtype=float)
            if lower.shape != upper.shape or lower.ndim != 1:
                raise ValueError("rect lower/upper must be 1-d and of equal length")
            if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
                raise ValueError("rect corners must be finite")
            if not np.all(lower < upper):
                raise ValueError("rect requires lower < upper componentwise")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")

    @property
    def dim(self) -> int:
        return len(self.center) if self.kind == "disk" else len(self.lower)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "disk":
            return self.center - self.radius, self.center + self.radius
        return self.lower, self.upper

    def volume(self) -> float:
        if self.kind == "disk":
            d = self.dim
            # volume of the d-ball: pi^(d/2) / Gamma(d/2 + 1) * r^d
            from scipy.special import gamma

            return float(np.pi ** (d / 2) / gamma(d / 2 + 1) * self.radius**d)
        return float(np.prod(self.upper - self.lower))


def disk(center=(0.0, 0.0), radius: float = 1.0) -> Domain:
    return Domain(kind="disk", center=np.asarray(center, dtype=float), radius=float(radius))


def rect(lower, upper) -> Domain:
    return Domain(kind="rect", lower=np.asarray(lower, dtype=float), upper=np.asarray(upper, dtype=float))


def contains(domain: Domain, p: np.ndarray) -> bool | np.ndarray:
    """Membership in the closed domain; accepts a point (d,) or a batch (n, d)."""
    p = np.asarray(p, dtype=float)
    if domain.kind == "disk":
        d2 = np.sum((p - domain.center) ** 2, axis=-1)
        out = d2 <= domain.radius**2
    else:
        out = np.all((p >= domain.lower) & (p <= domain.upper), axis=-1)
    return bool(out) if np.ndim(out) == 0 else out


def diameter(domain: Domain) -> float:
    """Supremum of pairwise distances: 2r for a disk, corner diagonal for a rect."""
    if domain.kind == "disk":
        return 2.0 * domain.radius
    return float(np.linalg.norm(domain.upper - domain.lower))


def sample_uniform(domain: Domain, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draws from the domain; rejection from the bounding box for disks.

    Returns (d,) when size is None, else (size, d).  Deterministic given the
    generator state.
    """
    n = 1 if size is None else int(size)
    lo, hi = domain.bounding_box()
    d = domain.dim
    if domain.kind == "rect":
        pts = rng.uniform(lo, hi, size=(n, d))
    else:
        pts = np.empty((n, d))
        got = 0
        while got < n:
            # acceptance rate is vol(ball)/vol(box) (pi/4 in d=2); oversample a bit
            need = n - got
            cand = rng.uniform(lo, hi, size=(max(8, int(need * 1.8)), d))
            ok = cand[np.sum((cand - domain.center) ** 2, axis=1) <= domain.radius**2]
            take = min(len(ok), need)
            pts[got : got + take] = ok[:take]
            got += take
    return pts[0] if size is None else pts


@dataclass(frozen=True)
class CellGrid:
    """Uniform grid over the domain's bounding box, restricted to the domain.

    resolution cells per axis; a cell is active when its center lies in the
    domain.  Used as the discretization carrier for density fields and
    level sets (d = 2 only).
    """

    domain: Domain
    resolution: int
    lower: np.ndarray = field(init=False)
    side: np.ndarray = field(init=False)
    active: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be positive")
        if self.domain.dim != 2:
            raise ValueError("CellGrid supports d = 2 only")
        lo, hi = self.domain.bounding_box()
        side = (hi - lo) / self.resolution
        centers = self.cell_centers_full(lo, side)
        active = contains(self.domain, centers.reshape(-1, 2)).reshape(centers.shape[:2])
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "active", active)

    def cell_centers_full(self, lo=None, side=None) -> np.ndarray:
        """Centers of every bounding-box cell, shape (res, res, 2), index [ix, iy]."""
        lo = self.lower if lo is None else lo
        side = self.side if side is None else side
        n = self.resolution
        cx = lo[0] + (np.arange(n) + 0.5) * side[0]
        cy = lo[1] + (np.arange(n) + 0.5) * side[1]
        out = np.empty((n, n, 2))
        out[..., 0] = cx[:, None]
        out[..., 1] = cy[None, :]
        return out

    @property
    def cell_centers(self) -> np.ndarray:
        """Centers of active cells only, shape (n_active, 2)."""
        return self.cell_centers_full()[self.active]

    @property
    def cell_volume(self) -> float:
        return float(self.side[0] * self.side[1])

    def cell_index(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Integer cell coordinates of points (n, 2), clipped to the grid."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ij = np.floor((pts - self.lower) / self.side).astype(np.int64)
        np.clip(ij, 0, self.resolution - 1, out=ij)
        return ij[:, 0], ij[:, 1]
