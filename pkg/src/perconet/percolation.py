"""Static continuum percolation: Poisson clouds, ball-union clusters, and
Monte Carlo tables of the percolation probability.

The percolation probability is estimated on a finite box as the probability
that the component of the ball union meeting the origin ball B(0,R) also
reaches the shell near the box boundary and contains at least one process
point.  Tables store isotonic-corrected estimates on a normalized intensity
grid together with the d=2 critical constant.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gamma as _gamma

from ._labeling import label_positions

LAMBDA_CR_2D = 0.6763475
"""Critical intensity of the unit-radius Gilbert disk model in d=2 (simulation value)."""

LAMBDA_CR_2D_BOUNDS = (0.174, 0.843)
"""Rigorous lower/upper bounds on the d=2 critical intensity."""

DEFAULT_EPS_LAMBDA = 1e-6 * LAMBDA_CR_2D
"""One-sided intensity offset separating the left/right-continuous lookups."""


class ThetaExtrapolationWarning(UserWarning):
    """A lookup fell outside the table grid and was clamped."""


def ball_volume(d: int, r: float) -> float:
    return float(np.pi ** (d / 2) / _gamma(d / 2 + 1) * r**d)


@dataclass(frozen=True)
class PointCloud:
    """Poisson sample in the box [-L/2, L/2]^d with intensity lambda."""

    points: np.ndarray
    box_half_width: float
    intensity: float


@dataclass(frozen=True)
class ClusterLabeling:
    """Component labels (first-occurrence numbering) for a ball union."""

    labels: np.ndarray
    component_sizes: np.ndarray
    radius: float

    def n_components(self) -> int:
        return len(self.component_sizes)

    def same_component(self, i: int, j: int) -> bool:
        return bool(self.labels[i] == self.labels[j])


def sample_poisson(lam: float, box_half_width: float, rng: np.random.Generator, d: int = 2) -> PointCloud:
    """Poisson(lam * L^d) many i.i.d. uniform points in the centered box of side L."""
    if lam < 0:
        raise ValueError("intensity must be >= 0")
    if not box_half_width > 0:
        raise ValueError("box_half_width must be > 0")
    volume = (2.0 * box_half_width) ** d
    n = rng.poisson(lam * volume)
    pts = rng.uniform(-box_half_width, box_half_width, size=(n, d))
    return PointCloud(points=pts, box_half_width=box_half_width, intensity=lam)


def label_clusters(points: np.ndarray, radius: float) -> ClusterLabeling:
    """Components of the graph with an edge iff pairwise distance < 2 * radius."""
    labels = label_positions(points, radius)
    sizes = np.bincount(labels) if len(labels) else np.zeros(0, dtype=np.int64)
    return ClusterLabeling(labels=labels, component_sizes=sizes, radius=radius)


def _trial_rng(seed: int, grid_index: int, trial_index: int) -> np.random.Generator:
    """Independent per-trial stream; reduction order never depends on workers."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(grid_index, trial_index)))


def theta_trial(lam: float, radius: float, box_half_width: float, rng: np.random.Generator, d: int = 2) -> bool:
    """One percolation-proxy trial: does the origin ball join a shell-reaching component?

    The origin is added as an auxiliary point so the labeling decides which
    component meets B(0,R); success additionally requires that component to
    contain a real process point and to reach |x|_inf >= L/2 - 2R.
    """
    cloud = sample_poisson(lam, box_half_width, rng, d=d)
    pts = cloud.points
    n = len(pts)
    if n == 0:
        return False
    augmented = np.vstack([pts, np.zeros((1, d))])
    labels = label_positions(augmented, radius)
    member = labels[:n] == labels[n]
    if not member.any():
        return False
    shell = box_half_width - 2.0 * radius
    return bool(np.max(np.abs(pts[member])) >= shell)


def theta_hits(
    lam: float,
    radius: float,
    box_half_width: float,
    seed: int,
    grid_index: int,
    trial_lo: int,
    trial_hi: int,
    d: int = 2,
) -> int:
    """Success count over trial indices [trial_lo, trial_hi); chunk-shape independent."""
    hits = 0
    for t in range(trial_lo, trial_hi):
        if theta_trial(lam, radius, box_half_width, _trial_rng(seed, grid_index, t), d=d):
            hits += 1
    return hits


def estimate_theta_bar(
    lam: float,
    radius: float,
    box_half_width: float,
    trials: int,
    seed: int,
    grid_index: int = 0,
    d: int = 2,
    map_fn=None,
    chunk: int = 256,
) -> tuple[float, float]:
    """Monte Carlo estimate of the percolation probability with binomial stderr.

    map_fn, when given, is an order-preserving map (e.g. Pool.map over a
    prepared chunk list); per-trial streams are keyed by (seed, grid_index,
    trial index) so the result is identical for any chunking.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not box_half_width * 2.0 > 8.0 * radius:
        raise ValueError("box side must exceed 8 * radius")
    if map_fn is None:
        hits = theta_hits(lam, radius, box_half_width, seed, grid_index, 0, trials, d=d)
    else:
        bounds = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
        args = [(lam, radius, box_half_width, seed, grid_index, lo, hi, d) for lo, hi in bounds]
        hits = sum(map_fn(_theta_hits_star, args))
    p = hits / trials
    return p, float(np.sqrt(p * (1.0 - p) / trials))


def _theta_hits_star(args):
    return theta_hits(*args)


def isotonic_fit(y: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted pool-adjacent-violators: nondecreasing least-squares fit."""
    vals: list[float] = []
    wts: list[float] = []
    counts: list[int] = []
    for yi, wi in zip(np.asarray(y, dtype=float), np.asarray(weights, dtype=float)):
        vals.append(yi)
        wts.append(wi)
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            w = wts[-2] + wts[-1]
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / w
            vals.pop()
            wts.pop()
            c = counts.pop()
            vals[-1], wts[-1] = v, w
            counts[-1] += c
    out = np.repeat(vals, counts)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class ThetaTable:
    """Monotone-corrected percolation-probability table on a normalized grid.

    lambda_grid holds normalized intensities lambda' = lambda * R^d, so the
    table is radius-free; lookups rescale by R^d.
    """

    lambda_grid: np.ndarray
    raw_estimates: np.ndarray
    std_errors: np.ndarray
    monotone_fit: np.ndarray
    box_half_width: float
    trials: int
    d: int = 2
    seed: int = 0
    eps_lambda: float = DEFAULT_EPS_LAMBDA
    lambda_cr_const: float = LAMBDA_CR_2D

    def __post_init__(self):
        g = np.asarray(self.lambda_grid, dtype=float)
        if len(g) == 0:
            raise ValueError("empty lambda grid")
        if np.any(np.diff(g) <= 0) or np.any(g < 0):
            raise ValueError("lambda grid must be increasing and nonnegative")
        for name in ("lambda_grid", "raw_estimates", "std_errors", "monotone_fit"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "raw", "stderr", "fit", "trials", "L"])
            for lam, raw, se, fit in zip(
                self.lambda_grid, self.raw_estimates, self.std_errors, self.monotone_fit
            ):
                w.writerow([repr(lam), repr(raw), repr(se), repr(fit), self.trials, repr(2.0 * self.box_half_width)])
        sidecar = {
            "seed": self.seed,
            "d": self.d,
            "eps_lambda": self.eps_lambda,
            "lambda_cr_const": self.lambda_cr_const,
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "ThetaTable":
        path = Path(path)
        rows = list(csv.DictReader(open(path)))
        meta = json.loads(Path(str(path) + ".json").read_text())
        return cls(
            lambda_grid=np.array([float(r["lambda"]) for r in rows]),
            raw_estimates=np.array([float(r["raw"]) for r in rows]),
            std_errors=np.array([float(r["stderr"]) for r in rows]),
            monotone_fit=np.array([float(r["fit"]) for r in rows]),
            box_half_width=float(rows[0]["L"]) / 2.0,
            trials=int(rows[0]["trials"]),
            d=int(meta["d"]),
            seed=int(meta["seed"]),
            eps_lambda=float(meta["eps_lambda"]),
            lambda_cr_const=float(meta["lambda_cr_const"]),
        )


def synthetic_theta_table(lambda_grid, fit_values, **kwargs) -> ThetaTable:
    """Table with prescribed fit values (degenerate tests and limit checks)."""
    g = np.asarray(lambda_grid, dtype=float)
    v = np.asarray(fit_values, dtype=float)
    return ThetaTable(
        lambda_grid=g,
        raw_estimates=v.copy(),
        std_errors=np.zeros_like(v),
        monotone_fit=v.copy(),
        box_half_width=kwargs.pop("box_half_width", 20.0),
        trials=kwargs.pop("trials", 1),
        **kwargs,
    )


def build_theta_table(
    lambda_grid,
    trials: int,
    box_half_width: float,
    seed: int,
    radius: float = 1.0,
    d: int = 2,
    eps_lambda: float = DEFAULT_EPS_LAMBDA,
    map_fn=None,
) -> ThetaTable:
    """Estimate the table on the grid (normalized by radius) and fit monotonely."""
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(grid) <= 0) or np.any(grid < 0):
        raise ValueError("lambda grid must be increasing and nonnegative")
    raws = np.empty(len(grid))
    errs = np.empty(len(grid))
    for i, lam in enumerate(grid):
        raws[i], errs[i] = estimate_theta_bar(
            lam / radius**d, radius, box_half_width, trials, seed, grid_index=i, d=d, map_fn=map_fn
        )
    fit = isotonic_fit(raws, np.full(len(grid), float(trials)))
    return ThetaTable(
        lambda_grid=grid,
        raw_estimates=raws,
        std_errors=errs,
        monotone_fit=fit,
        box_half_width=box_half_width,
        trials=trials,
        d=d,
        seed=seed,
        eps_lambda=eps_lambda,
    )


def theta_lookup(table: ThetaTable, lam: float, radius: float, side: str = "left") -> float:
    """One-sided interpolated lookup of the fitted table at lambda * R^d.

    side="left" evaluates just below the target (left-continuous variant, for
    the strict super-level convention), side="right" just above.  Lookups are
    clamped to the grid; clamping away from a zero end value warns.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    x = lam * radius**table.d
    x = x - table.eps_lambda if side == "left" else x + table.eps_lambda
    grid, fit = table.lambda_grid, table.monotone_fit
    if x < grid[0]:
        if fit[0] > 0.0:
            warnings.warn("lookup below table grid clamped", ThetaExtrapolationWarning, stacklevel=2)
        return float(np.clip(fit[0], 0.0, 1.0))
    if x > grid[-1]:
        if fit[-1] < 1.0:
            warnings.warn("lookup above table grid clamped", ThetaExtrapolationWarning, stacklevel=2)
        return float(np.clip(fit[-1], 0.0, 1.0))
    return float(np.clip(np.interp(x, grid, fit), 0.0, 1.0))


def steepest_rise_location(table: ThetaTable) -> float:
    """Midpoint of the grid interval where the monotone fit rises fastest."""
    grid, fit = table.lambda_grid, table.monotone_fit
    if len(grid) < 3:
        raise ValueError("need at least 3 grid points")
    slopes = np.diff(fit) / np.diff(grid)
    k = int(np.argmax(slopes))
    if slopes[k] <= 0:
        raise RuntimeError("table has no rise inside the grid")
    return float(0.5 * (grid[k] + grid[k + 1]))


def estimate_lambda_cr(tables: list[ThetaTable], pad_steps: float = 1.5) -> tuple[float, float]:
    """Bracket the critical intensity from tables at several box sizes.

    The fitted curves at different box sizes are nested (larger boxes lie
    below everywhere), so instead of a literal curve crossing the bracket is
    built from the per-box steepest-rise locations, which sharpen toward the
    critical point as the box grows; the bracket pads by pad_steps grid steps
    on each side.  Raises when fewer than two box sizes are given, the grids
    differ, the grid does not span (0.4, 1.0), or some curve has no rise.
    """
    if len(tables) < 2:
        raise ValueError("need tables for at least two box sizes")
    sizes = {t.box_half_width for t in tables}
    if len(sizes) != len(tables):
        raise ValueError("box sizes must be distinct")
    grid = tables[0].lambda_grid
    for t in tables[1:]:
        if len(t.lambda_grid) != len(grid) or not np.allclose(t.lambda_grid, grid):
            raise ValueError("tables must share a common grid")
    if grid[0] > 0.4 or grid[-1] < 1.0:
        raise ValueError("grid must span (0.4, 1.0)")
    locs = [steepest_rise_location(t) for t in tables]
    step = float(np.median(np.diff(grid)))
    lo = min(locs) - pad_steps * step
    hi = max(locs) + pad_steps * step
    return lo, hi


@dataclass(frozen=True)
class ExpBoundSeries:
    """Per-intensity decay ratios log(1 - fit) / (lambda * vol(B(0, 2)))."""

    lam: np.ndarray
    ratio: np.ndarray
    below_resolution: np.ndarray = field(default_factory=lambda: np.zeros(0))


def exp_bound_diagnostic(table: ThetaTable, d: int | None = None) -> ExpBoundSeries:
    """Decay-rate diagnostic; the ratios approach -1 from above as lambda grows."""
    d = table.d if d is None else d
    vol2 = ball_volume(d, 2.0)
    lam, ratio, excluded = [], [], []
    for x, fit in zip(table.lambda_grid, table.monotone_fit):
        if x <= 0:
            continue
        if fit >= 1.0:
            excluded.append(x)
            continue
        lam.append(x)
        ratio.append(np.log1p(-fit) / (x * vol2))
    return ExpBoundSeries(
        lam=np.array(lam), ratio=np.array(ratio), below_resolution=np.array(excluded)
    )
