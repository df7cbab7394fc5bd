"""Chart-defined Riemannian manifolds and deterministic sampling."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .expr import Expr, differentiate, evaluate

DEFAULT_WINDOW = (-5.0, 5.0)
DEFAULT_MARGIN = 1e-3
SPD_THRESHOLD = 1e-10


class ManifoldError(ValueError):
    pass


class NonSPDError(ManifoldError):
    pass


class EmptyDomainError(ManifoldError):
    pass


@dataclass(frozen=True)
class Interval:
    """Open interval ``(lo, hi)`` with isolated excluded values."""

    lo: float = -math.inf
    hi: float = math.inf
    exclude: tuple[float, ...] = ()

    def window(self, window: tuple[float, float]) -> tuple[float, float]:
        lo = self.lo if math.isfinite(self.lo) else window[0]
        hi = self.hi if math.isfinite(self.hi) else window[1]
        if math.isfinite(self.lo) and not math.isfinite(self.hi) and hi <= lo:
            hi = lo + (window[1] - window[0])
        if math.isfinite(self.hi) and not math.isfinite(self.lo) and hi <= lo:
            lo = hi - (window[1] - window[0])
        return lo, hi


def eval_array(exprs, points: np.ndarray) -> np.ndarray:
    """Evaluate a nested list of expressions at (N, dim) points -> (N, *shape)."""
    arr = np.asarray(exprs, dtype=object)
    flat = [evaluate(e, points) for e in arr.ravel()]
    out = np.stack(flat, axis=-1) if flat else np.zeros((len(points), 0))
    return out.reshape((len(points),) + arr.shape)


class MetricJet(NamedTuple):
    """Metric and its first two coordinate derivatives at N points.

    ``dg[n, a, i, j] = d_a g_ij`` and ``ddg[n, a, b, i, j] = d_a d_b g_ij``.
    """

    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray


@dataclass(frozen=True, eq=False)
class ChartManifold:
    """A single chart with a metric given by components or by an orthonormal frame.

    ``metric[i][j]`` are the components g_ij; alternatively ``frame[i][c]`` is
    the i-th coordinate component of the c-th frame vector (columns are frame
    vectors) and the metric is the one making that frame orthonormal.
    """

    name: str
    coords: tuple[str, ...]
    domain: tuple[Interval, ...]
    metric: tuple[tuple[Expr, ...], ...] | None = None
    frame: tuple[tuple[Expr, ...], ...] | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        d = len(self.coords)
        if d < 1:
            raise ManifoldError("a manifold needs at least one coordinate")
        if len(self.domain) != d:
            raise ManifoldError("domain must give one interval per coordinate")
        if (self.metric is None) == (self.frame is None):
            raise ManifoldError("give exactly one of metric components or frame")
        spec = self.metric if self.metric is not None else self.frame
        if len(spec) != d or any(len(row) != d for row in spec):
            raise ManifoldError(f"metric/frame must be {d}x{d}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def frame_spec(self) -> bool:
        return self.frame is not None

    # -- symbolic derivatives, computed once -------------------------------

    def _derivs(self, mat):
        d = self.dim
        first = [[[differentiate(mat[i][j], self.coords[a]) for j in range(d)]
                  for i in range(d)] for a in range(d)]
        second = [[None] * d for _ in range(d)]
        for a, b in itertools.combinations_with_replacement(range(d), 2):
            second[a][b] = [[differentiate(first[a][i][j], self.coords[b]) for j in range(d)]
                            for i in range(d)]
            second[b][a] = second[a][b]
        return first, second

    @cached_property
    def _spec_derivs(self):
        return self._derivs(self.metric if self.metric is not None else self.frame)

    # -- pointwise evaluation ----------------------------------------------

    def _as_points(self, points) -> tuple[np.ndarray, bool]:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[-1] != self.dim:
            raise ManifoldError(f"{self.name}: points must have {self.dim} coordinates")
        return pts, single

    def frame_matrix(self, points) -> np.ndarray:
        if not self.frame_spec:
            raise ManifoldError(f"{self.name} is not frame-specified")
        pts, single = self._as_points(points)
        E = eval_array(self.frame, pts)
        det = np.abs(np.linalg.det(E))
        if np.any(det <= SPD_THRESHOLD):
            bad = pts[int(np.argmin(det))]
            raise NonSPDError(f"{self.name}: frame is singular at {tuple(bad)}")
        return E[0] if single else E

    def metric_jet(self, points) -> MetricJet:
        pts, _ = self._as_points(points)
        first, second = self._spec_derivs
        if not self.frame_spec:
            g = eval_array(self.metric, pts)
            g = 0.5 * (g + np.swapaxes(g, -1, -2))
            self._check_spd(g, pts)
            ginv = np.linalg.inv(g)
            return MetricJet(g, ginv, eval_array(first, pts), eval_array(second, pts))
        E = self.frame_matrix(pts)
        dE = eval_array(first, pts)
        ddE = eval_array(second, pts)
        H = np.linalg.inv(E)
        # d(E^-1) = -E^-1 dE E^-1 and its derivative
        HdE = np.einsum("nij,najk->naik", H, dE)
        dH = -np.einsum("naij,njk->naik", HdE, H)
        ddH = (np.einsum("naij,nbjk,nkl->nabil", HdE, HdE, H)
               + np.einsum("nbij,najk,nkl->nabil", HdE, HdE, H)
               - np.einsum("nij,nabjk,nkl->nabil", H, ddE, H))
        g = np.einsum("nki,nkj->nij", H, H)
        dg = np.einsum("naki,nkj->naij", dH, H)
        dg = dg + np.swapaxes(dg, -1, -2)
        ddg = (np.einsum("nabki,nkj->nabij", ddH, H)
               + np.einsum("naki,nbkj->nabij", dH, dH))
        ddg = ddg + np.swapaxes(ddg, -1, -2)
        ginv = np.einsum("nik,njk->nij", E, E)
        self._check_spd(g, pts)
        return MetricJet(g, ginv, dg, ddg)

    def _check_spd(self, g: np.ndarray, pts: np.ndarray) -> None:
        lam = np.linalg.eigvalsh(g)[:, 0]
        if np.any(~(lam > SPD_THRESHOLD)):
            k = int(np.argmin(np.nan_to_num(lam, nan=-np.inf)))
            raise NonSPDError(f"{self.name}: metric is not positive definite at "
                              f"{tuple(float(c) for c in pts[k])} (min eigenvalue {lam[k]:.3g})")

    def metric_at(self, points) -> np.ndarray:
        """Metric matrix at one point (d, d) or at N points (N, d, d)."""
        pts, single = self._as_points(points)
        if self.frame_spec:
            H = np.linalg.inv(self.frame_matrix(pts))
            g = np.einsum("nki,nkj->nij", H, H)
        else:
            g = eval_array(self.metric, pts)
            g = 0.5 * (g + np.swapaxes(g, -1, -2))
        self._check_spd(g, pts)
        return g[0] if single else g

    def orthonormal_frame(self, points) -> np.ndarray:
        """Orthonormal frame as columns: the declared frame when there is one,
        otherwise Gram-Schmidt of the coordinate basis in coordinate order."""
        if self.frame_spec:
            self.metric_at(points)
            return self.frame_matrix(points)
        g = self.metric_at(points)
        L = np.linalg.cholesky(g)
        return np.swapaxes(np.linalg.inv(L), -1, -2)

    # -- domain and sampling -------------------------------------------------

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        pts, _ = self._as_points(points)
        ok = np.ones(len(pts), dtype=bool)
        for c, iv in enumerate(self.domain):
            x = pts[:, c]
            ok &= (x > iv.lo + margin) if math.isfinite(iv.lo) else np.isfinite(x)
            ok &= (x < iv.hi - margin) if math.isfinite(iv.hi) else np.isfinite(x)
            for v in iv.exclude:
                ok &= np.abs(x - v) >= max(margin, 0.0) if margin > 0 else x != v
        return ok

    def sample_points(self, n: int, seed: int = 0, *, window: tuple[float, float] = DEFAULT_WINDOW,
                      margin: float = DEFAULT_MARGIN) -> np.ndarray:
        """``ceil(n/2)`` grid points followed by seeded uniform random points, shape (n, dim)."""
        if n < 1:
            raise ValueError("n must be at least 1")
        boxes = []
        for c, iv in enumerate(self.domain):
            lo, hi = iv.window(window)
            lo, hi = lo + margin, hi - margin
            if not lo < hi:
                raise EmptyDomainError(f"{self.name}: no feasible values for {self.coords[c]}")
            bands = [(v - margin, v + margin) for v in iv.exclude if lo < v + margin and v - margin < hi]
            if any(b_lo <= lo and hi <= b_hi for b_lo, b_hi in bands):
                raise EmptyDomainError(f"{self.name}: no feasible values for {self.coords[c]}")
            boxes.append((lo, hi))
        lo = np.array([b[0] for b in boxes])
        hi = np.array([b[1] for b in boxes])

        n_grid = math.ceil(n / 2)
        per_axis = max(1, math.ceil(n_grid ** (1.0 / self.dim) - 1e-9))
        axes = [lo[c] + (np.arange(per_axis) + 0.5) * (hi[c] - lo[c]) / per_axis for c in range(self.dim)]
        full = np.array(list(itertools.product(*axes)))
        pick = np.unique(np.round(np.linspace(0, len(full) - 1, n_grid)).astype(int))
        grid = self._push_out_of_exclusions(full[pick], margin, lo, hi)

        rng = np.random.default_rng(seed)
        rand = np.empty((0, self.dim))
        need = n - len(grid)
        for _ in range(1000):
            if len(rand) >= need:
                break
            cand = rng.uniform(lo, hi, size=(max(need, 16), self.dim))
            rand = np.vstack([rand, cand[self._clear_of_exclusions(cand, margin)]])
        else:
            raise EmptyDomainError(f"{self.name}: could not sample the domain")
        return np.vstack([grid, rand[:need]])

    def _clear_of_exclusions(self, pts: np.ndarray, margin: float) -> np.ndarray:
        ok = np.ones(len(pts), dtype=bool)
        for c, iv in enumerate(self.domain):
            for v in iv.exclude:
                ok &= np.abs(pts[:, c] - v) >= margin
        return ok

    def _push_out_of_exclusions(self, pts, margin, lo, hi):
        pts = pts.copy()
        for c, iv in enumerate(self.domain):
            for v in iv.exclude:
                close = np.abs(pts[:, c] - v) < margin
                if np.any(close):
                    side = np.where(pts[close, c] >= v, 1.0, -1.0)
                    moved = v + side * 2 * margin
                    moved = np.where((moved < lo[c]) | (moved > hi[c]), v - side * 2 * margin, moved)
                    pts[close, c] = moved
        return pts


def sample_vectors(n_points: int, n_per_point: int, dim: int, seed: int,
                   bound: float = 1.0, count: int = 1) -> np.ndarray:
    """Coefficient-bounded tangent vectors, shape (count, n_points, n_per_point, dim)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EC7]))
    return rng.uniform(-bound, bound, size=(count, n_points, n_per_point, dim))


def metric_at(M: ChartManifold, p) -> np.ndarray:
    return M.metric_at(p)


def sample_points(M: ChartManifold, n: int, seed: int = 0, **kw) -> np.ndarray:
    return M.sample_points(n, seed, **kw)


def orthonormal_frame(M: ChartManifold, p) -> np.ndarray:
    return M.orthonormal_frame(p)


def coerce_points(points: Sequence) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=float))
