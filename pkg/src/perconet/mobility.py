"""Random waypoint mobility: trajectory generation, position evaluation, and
Monte Carlo estimation of the transient and stationary position densities.

A walker repeatedly draws an i.i.d. waypoint and an i.i.d. speed and travels
the straight segment; there are no pause times.  The stationary law of the
(position, target, velocity) triple is the trip-duration-biased trip law with
a uniform elapsed fraction, which gives both the burn-in-free exact stationary
initializer and the classical weighted-segment estimator of the position
density.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import CellGrid, Domain, contains, diameter, sample_uniform

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)
_PHI = 0.5 * np.pi * (_GL_NODES + 1.0)  # quadrature nodes mapped to [0, pi]
_PHI_W = 0.5 * np.pi * _GL_WEIGHTS
_COS2 = np.cos(_PHI) ** 2

DEFAULT_BURN_IN_TRIPS = 50.0


@dataclass(frozen=True)
class VelocityLaw:
    """Speed distribution on [v_minus, v_plus], bounded away from 0 and infinity.

    kind "uniform" or "power" (density proportional to v**exponent).
    """

    v_minus: float = 0.5
    v_plus: float = 1.5
    kind: str = "uniform"
    exponent: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.v_minus <= self.v_plus < np.inf):
            raise ValueError("need 0 < v_minus <= v_plus < inf")
        if self.kind not in ("uniform", "power"):
            raise ValueError(f"unknown velocity law kind {self.kind!r}")

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray | float:
        if self.kind == "uniform":
            return rng.uniform(self.v_minus, self.v_plus, size=size)
        u = rng.uniform(0.0, 1.0, size=size)
        a = self.exponent
        if abs(a + 1.0) < 1e-12:
            return self.v_minus * (self.v_plus / self.v_minus) ** u
        lo, hi = self.v_minus ** (a + 1.0), self.v_plus ** (a + 1.0)
        return (lo + u * (hi - lo)) ** (1.0 / (a + 1.0))


@dataclass(frozen=True)
class WaypointLaw:
    """Waypoint distribution on the domain: uniform, or a custom bounded density."""

    domain: Domain
    kind: str = "uniform"
    density: object = None  # callable (n, d) -> (n,), required for kind="custom"
    density_bound: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "custom"):
            raise ValueError(f"unknown waypoint law kind {self.kind!r}")
        if self.kind == "custom":
            if self.density is None or not self.density_bound > 0:
                raise ValueError("custom waypoint law needs density and positive bound")
            self._check_normalization()

    def _check_normalization(self):
        grid = CellGrid(self.domain, 256)
        centers = grid.cell_centers
        total = float(np.sum(self.density(centers)) * grid.cell_volume)
        if abs(total - 1.0) > 0.01:
            raise ValueError(f"custom waypoint density integrates to {total:.4f}, not 1")

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        if self.kind == "uniform":
            return sample_uniform(self.domain, rng, size=size)
        n = 1 if size is None else int(size)
        out = np.empty((n, self.domain.dim))
        got = 0
        while got < n:
            cand = sample_uniform(self.domain, rng, size=max(8, 2 * (n - got)))
            accept = rng.uniform(0.0, self.density_bound, size=len(cand)) <= self.density(cand)
            picked = cand[accept][: n - got]
            out[got : got + len(picked)] = picked
            got += len(picked)
        return out[0] if size is None else out


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear path: waypoints[k] is reached at arrivals[k] (arrivals[0]=0);
    velocities[k-1] is the speed on the segment toward waypoints[k].

    waypoints[0] is the start position; it is a mu-sample only for
    waypoint-start initial conditions.
    """

    waypoints: np.ndarray
    velocities: np.ndarray
    arrivals: np.ndarray
    horizon: float

    def __post_init__(self):
        if self.arrivals[-1] < self.horizon:
            raise ValueError("trajectory must cover the horizon")
        if np.any(np.diff(self.arrivals) <= 0):
            raise ValueError("arrival times must be strictly increasing")

    @property
    def n_trips(self) -> int:
        return len(self.velocities)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "Wx", "Wy", "V", "R"])
            for k in range(len(self.waypoints)):
                v = "" if k == 0 else repr(float(self.velocities[k - 1]))
                w.writerow([k, repr(self.waypoints[k, 0]), repr(self.waypoints[k, 1]), v, repr(float(self.arrivals[k]))])

    @classmethod
    def from_csv(cls, path: str | Path, horizon: float | None = None) -> "Trajectory":
        rows = list(csv.DictReader(open(path)))
        W = np.array([[float(r["Wx"]), float(r["Wy"])] for r in rows])
        V = np.array([float(r["V"]) for r in rows[1:]])
        R = np.array([float(r["R"]) for r in rows])
        return cls(waypoints=W, velocities=V, arrivals=R, horizon=R[-1] if horizon is None else horizon)


def _extend_trips(wlaw, vlaw, W_last, t_last, total_T, rng, block=None):
    """Append i.i.d. trips until the cumulative time strictly exceeds total_T."""
    Ws = [np.atleast_2d(W_last)]
    Vs = []
    Rs = [np.array([t_last])]
    mean_trip_guess = 0.5 * diameter(wlaw.domain) / vlaw.v_minus
    while Rs[-1][-1] <= total_T:
        n = block or max(8, int((total_T - Rs[-1][-1]) / mean_trip_guess * 1.5) + 4)
        w_new = wlaw.sample(rng, size=n)
        v_new = np.asarray(vlaw.sample(rng, size=n))
        prev = Ws[-1][-1]
        seg = np.vstack([prev[None, :], w_new])
        dists = np.linalg.norm(np.diff(seg, axis=0), axis=1)
        Rs.append(Rs[-1][-1] + np.cumsum(dists / v_new))
        Ws.append(w_new)
        Vs.append(v_new)
    W = np.vstack(Ws)
    V = np.concatenate(Vs) if Vs else np.empty(0)
    R = np.concatenate(Rs)
    keep = int(np.searchsorted(R, total_T, side="right")) + 1
    return W[:keep], V[: keep - 1], R[:keep]


def sample_stationary_state(wlaw: WaypointLaw, vlaw: VelocityLaw, rng: np.random.Generator):
    """Exact draw of the equilibrium (position, target, velocityode) triple.

    The stationary trip is duration-biased (rejection against the maximal trip
    time diam(D)/v_minus) and the elapsed fraction is uniform.
    """
    u_max = diameter(wlaw.domain) / vlaw.v_minus
    while True:
        w0 = wlaw.sample(rng)
        w1 = wlaw.sample(rng)
        v = float(vlaw.sample(rng))
        trip = float(np.linalg.norm(w1 - w0)) / v
        if rng.uniform(0.0, u_max) <= trip:
            break
    frac = rng.uniform(0.0, 1.0)
    x = w0 + frac * (w1 - w0)
    return x, w1, v


def simulate_trajectory(
    wlaw: WaypointLaw,
    vlaw: VelocityLaw,
    horizon: float,
    init: str = "waypoint",
    rng: np.random.Generator | None = None,
    burn_in: float | None = None,
) -> Trajectory:
    """Simulate a random waypoint path covering [0, horizon].

    init selects the initial condition:
      "waypoint"            start at a fresh mu-distributed waypoint,
      "stationary-burn-in"  simulate for a burn-in period (default 50 maximal
                            trips) and re-time so that time 0 is the cut point,
      "stationary"          exact equilibrium start (duration-biased trip).
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    rng = np.random.default_rng() if rng is None else rng
    if init == "waypoint":
        start = wlaw.sample(rng)
        W, V, R = _extend_trips(wlaw, vlaw, start, 0.0, horizon, rng)
        return Trajectory(waypoints=W, velocities=V, arrivals=R, horizon=horizon)
    if init == "stationary-burn-in":
        b = (DEFAULT_BURN_IN_TRIPS * diameter(wlaw.domain) / vlaw.v_minus) if burn_in is None else burn_in
        full = simulate_trajectory(wlaw, vlaw, b + horizon, init="waypoint", rng=rng)
        k = int(np.searchsorted(full.arrivals, b, side="right"))
        pos, _, _ = position_at(full, b)
        W = np.vstack([pos[None, :], full.waypoints[k:]])
        V = full.velocities[k - 1 :]
        R = np.concatenate([[0.0], full.arrivals[k:] - b])
        keep = int(np.searchsorted(R, horizon, side="right")) + 1
        return Trajectory(waypoints=W[:keep], velocities=V[: keep - 1], arrivals=R[:keep], horizon=horizon)
    if init == "stationary":
        x, w1, v = sample_stationary_state(wlaw, vlaw, rng)
        first_arrival = float(np.linalg.norm(w1 - x)) / v
        W, V, R = _extend_trips(wlaw, vlaw, w1, first_arrival, horizon, rng)
        W = np.vstack([x[None, :], W])
        V = np.concatenate([[v], V])
        R = np.concatenate([[0.0], R])
        return Trajectory(waypoints=W, velocities=V, arrivals=R, horizon=horizon)
    raise ValueError(f"unknown init {init!r}")


def position_at(traj: Trajectory, t):
    """Right-continuous state at time(s) t: (position, target waypoint, speed).

    Scalar t gives ((d,), (d,), float); an array of shape (m,) gives
    ((m, d), (m, d), (m,)).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0) or np.any(t_arr > traj.horizon):
        raise ValueError("time outside [0, horizon]")
    W, V, R = traj.waypoints, traj.velocities, traj.arrivals
    k = np.searchsorted(R, t_arr, side="right")
    np.clip(k, 1, len(W) - 1, out=k)
    back = W[k - 1] - W[k]
    norm = np.linalg.norm(back, axis=1)
    safe = np.where(norm > 0, norm, 1.0)
    pos = W[k] + back / safe[:, None] * (V[k - 1] * (R[k] - t_arr))[:, None]
    pos[norm == 0] = W[k][norm == 0]
    if np.ndim(t) == 0:
        return pos[0], W[k][0], float(V[k - 1][0])
    return pos, W[k], V[k - 1]


@dataclass(frozen=True)
class DensityField:
    """Gridded probability density (per unit area) over a CellGrid (d = 2).

    values has shape (resolution, resolution); cells outside the domain hold 0.
    label is "stationary" or "transient(s)" for a fixed time s.
    """

    grid: CellGrid
    values: np.ndarray
    sample_count: int
    label: str = "stationary"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.resolution, self.grid.resolution):
            raise ValueError("values shape must match the grid")
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "values", v)

    def weighted_sum(self) -> float:
        """Cell-volume-weighted total mass (1 up to boundary-cell loss)."""
        return float(np.sum(self.values) * self.grid.cell_volume)

    def interpolate(self, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of the density at points (n, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        g = self.grid
        u = (pts - g.lower) / g.side - 0.5
        u = np.clip(u, 0.0, g.resolution - 1.0)
        i0 = np.minimum(u.astype(np.int64), g.resolution - 2)
        f = u - i0
        v = self.values
        ix, iy = i0[:, 0], i0[:, 1]
        fx, fy = f[:, 0], f[:, 1]
        return (
            v[ix, iy] * (1 - fx) * (1 - fy)
            + v[ix + 1, iy] * fx * (1 - fy)
            + v[ix, iy + 1] * (1 - fx) * fy
            + v[ix + 1, iy + 1] * fx * fy
        )

    def cell_masses(self) -> np.ndarray:
        """Active-cell probability masses, normalized to sum to one."""
        m = self.values[self.grid.active] * self.grid.cell_volume
        return m / np.sum(m)

    def tv_distance(self, other: "DensityField") -> float:
        """Total variation between the normalized cell-mass measures."""
        if other.grid.resolution != self.grid.resolution:
            raise ValueError("fields must share a grid")
        return float(0.5 * np.sum(np.abs(self.cell_masses() - other.cell_masses())))

    def sample_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw points from the field measure: weighted cell, uniform inside, in-domain."""
        g = self.grid
        active_idx = np.argwhere(g.active)
        masses = self.cell_masses()
        chosen = rng.choice(len(active_idx), size=n, p=masses)
        cells = active_idx[chosen]
        pts = g.lower + (cells + rng.uniform(0.0, 1.0, size=(n, 2))) * g.side
        bad = ~contains(g.domain, pts)
        while np.any(bad):
            k = int(np.sum(bad))
            pts[bad] = g.lower + (cells[bad] + rng.uniform(0.0, 1.0, size=(k, 2))) * g.side
            bad = ~contains(g.domain, pts)
        return pts

    def to_csv(self, path: str | Path, meta: dict | None = None) -> None:
        g = self.grid
        centers = g.cell_centers_full()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell_x", "cell_y", "value"])
            for ix, iy in np.argwhere(g.active):
                w.writerow([repr(centers[ix, iy, 0]), repr(centers[ix, iy, 1]), repr(self.values[ix, iy])])
        info = {
            "resolution": g.resolution,
            "samples": self.sample_count,
            "label": self.label,
        }
        info.update(meta or {})
        Path(str(path) + ".json").write_text(json.dumps(info, indent=2) + "\n")


def _deposit(grid: CellGrid, pts: np.ndarray, weights: np.ndarray, acc: np.ndarray) -> None:
    ix, iy = grid.cell_index(pts)
    np.add.at(acc, (ix, iy), weights)


def _segment_chunk(wlaw, vlaw, grid, n, rng):
    """Weighted-segment deposits for the stationary density estimator."""
    guard = 1e-9 * diameter(wlaw.domain)
    w0 = wlaw.sample(rng, size=n)
    w1 = wlaw.sample(rng, size=n)
    sep = np.linalg.norm(w1 - w0, axis=1)
    bad = sep < guard
    while np.any(bad):
        k = int(np.sum(bad))
        w0[bad] = wlaw.sample(rng, size=k)
        w1[bad] = wlaw.sample(rng, size=k)
        sep[bad] = np.linalg.norm(w1[bad] - w0[bad], axis=1)
        bad = sep < guard
    v = np.asarray(vlaw.sample(rng, size=n))
    s = rng.uniform(0.0, 1.0, size=n)
    pts = w0 + s[:, None] * (w1 - w0)
    weights = v / sep
    acc = np.zeros((grid.resolution, grid.resolution))
    _deposit(grid, pts, weights, acc)
    return acc, float(np.sum(weights))


def stationary_density(
    wlaw: WaypointLaw,
    vlaw: VelocityLaw,
    grid: CellGrid,
    samples: int,
    seed: int,
    map_fn=None,
    chunk: int = 200_000,
) -> DensityField:
    """Monte Carlo estimate of the stationary position density.

    Draws (W0, W1, V) and a uniform fraction along the segment and deposits
    weight V/|W1-W0| (nearly coincident waypoint pairs are redrawn); the
    histogram is normalized by total weight and cell volume.  Chunks carry
    independent streams keyed by (seed, chunk index), so results do not depend
    on the worker count.
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    bounds = [(i, min(chunk, samples - lo)) for i, lo in enumerate(range(0, samples, chunk))]
    args = [(wlaw, vlaw, grid, n, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))) for i, n in bounds]
    results = list(map(_segment_chunk_star, args) if map_fn is None else map_fn(_segment_chunk_star, args))
    acc = np.zeros((grid.resolution, grid.resolution))
    total = 0.0
    for a, t in results:
        acc += a
        total += t
    values = np.where(grid.active, acc / (total * grid.cell_volume), 0.0)
    return DensityField(grid=grid, values=values, sample_count=samples, label="stationary")


def _segment_chunk_star(args):
    return _segment_chunk(*args)


def _transient_chunk(wlaw, vlaw, s, init, grid, n, rng):
    acc = np.zeros((grid.resolution, grid.resolution))
    for _ in range(n):
        traj = simulate_trajectory(wlaw, vlaw, horizon=s, init=init, rng=rng)
        pos, _, _ = position_at(traj, s)
        _deposit(grid, pos[None, :], np.ones(1), acc)
    return acc, float(n)


def transient_density(
    wlaw: WaypointLaw,
    vlaw: VelocityLaw,
    s: float,
    init: str,
    grid: CellGrid,
    samples: int,
    seed: int,
    map_fn=None,
    chunk: int = 2_000,
) -> DensityField:
    """Histogram of the position at time s over independent trajectories."""
    if not s > 0:
        raise ValueError("time must be > 0")
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    bounds = [(i, min(chunk, samples - lo)) for i, lo in enumerate(range(0, samples, chunk))]
    args = [
        (wlaw, vlaw, s, init, grid, n, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,))))
        for i, n in bounds
    ]
    results = list(map(_transient_chunk_star, args) if map_fn is None else map_fn(_transient_chunk_star, args))
    acc = np.zeros((grid.resolution, grid.resolution))
    total = 0.0
    for a, t in results:
        acc += a
        total += t
    values = np.where(grid.active, acc / (total * grid.cell_volume), 0.0)
    return DensityField(grid=grid, values=values, sample_count=samples, label=f"transient({s})")


def disk_density_closed_form(x) -> np.ndarray | float:
    """Stationary position density on the unit disk for uniform waypoints and
    constant speed: (45 / 64 pi) (1 - |x|^2) * integral_0^pi sqrt(1 - |x|^2 cos^2 phi) dphi,
    with the angular integral evaluated by 256-node Gauss-Legendre quadrature.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    r2 = np.sum(pts**2, axis=1)
    if np.any(r2 > 1.0 + 1e-12):
        raise ValueError("point outside the closed unit disk")
    r2 = np.minimum(r2, 1.0)
    integral = np.sqrt(1.0 - r2[:, None] * _COS2[None, :]) @ _PHI_W
    out = 45.0 / (64.0 * np.pi) * (1.0 - r2) * integral
    return float(out[0]) if np.ndim(x) == 1 else out


def disk_density_approx(x) -> np.ndarray | float:
    """Polynomial approximation (2/pi)(1 - |x|^2) of the unit-disk stationary density."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    r2 = np.sum(pts**2, axis=1)
    if np.any(r2 > 1.0 + 1e-12):
        raise ValueError("point outside the closed unit disk")
    out = 2.0 / np.pi * (1.0 - np.minimum(r2, 1.0))
    return float(out[0]) if np.ndim(x) == 1 else out
