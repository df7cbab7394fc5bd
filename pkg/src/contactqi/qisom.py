"""Quasi-isometric embeddings between chart manifolds and the inequality suite.

An embedding is a base point map ``F`` together with a pointwise linear
pushforward ``J(p)`` sending coordinate components at ``p`` to coordinate
components at ``F(p)``. Every inequality is checked pointwise: source-side
quantities are evaluated at ``p`` and target-side ones at ``F(p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import structure as st
from .curvature import CurvatureBundle, flatness_test, einstein_fit
from .expr import Const, Expr, Var
from .manifold import ChartManifold, coerce_points, eval_array, sample_points, sample_vectors
from .reports import (FAIL, NOT_APPLICABLE, PASS, CheckReport, Hypothesis, sandwich_verdict)

SANDWICH_TOL = 1e-9
A_RANGE = (1.0, 100.0)
REFINEMENTS = 3


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Embedding:
    source: ChartManifold
    target: ChartManifold
    F: tuple[Expr, ...]
    J: tuple[tuple[Expr, ...], ...]   # J[i][j]: target component i of f_*(d_j)
    A: float = 1.0
    B: float = 0.0
    D: float | None = None
    source_structure: st.ContactStructure | None = None
    target_structure: st.ContactStructure | None = None

    def __post_init__(self):
        if self.source.dim != self.target.dim:
            raise EmbeddingError("source and target must have the same dimension")
        d = self.source.dim
        if len(self.F) != d or len(self.J) != d or any(len(row) != d for row in self.J):
            raise EmbeddingError(f"F and J must match dimension {d}")
        if not self.A >= 1:
            raise EmbeddingError(f"A must be at least 1, got {self.A}")
        if not self.B >= 0:
            raise EmbeddingError(f"B must be nonnegative, got {self.B}")
        if self.D is not None and not self.D >= 0:
            raise EmbeddingError(f"D must be nonnegative, got {self.D}")

    @classmethod
    def identity(cls, manifold: ChartManifold, structure=None, *, A: float = 1.0, B: float = 0.0,
                 D: float | None = None, scale: float = 1.0) -> "Embedding":
        """``F = id`` and ``J = scale * I`` on one manifold."""
        d = manifold.dim
        F = tuple(Var(c, i) for i, c in enumerate(manifold.coords))
        J = tuple(tuple(Const(scale if i == j else 0.0) for j in range(d)) for i in range(d))
        return cls(manifold, manifold, F, J, A, B, D, structure, structure)

    @property
    def dim(self) -> int:
        return self.source.dim

    def with_constants(self, A: float | None = None, B: float | None = None,
                       D: float | None = None) -> "Embedding":
        return Embedding(self.source, self.target, self.F, self.J,
                         self.A if A is None else A, self.B if B is None else B,
                         self.D if D is None else D, self.source_structure, self.target_structure)

    def base_map(self, points) -> np.ndarray:
        pts = coerce_points(points)
        q = eval_array(self.F, pts)
        inside = self.target.contains(q)
        if not np.all(inside):
            k = int(np.argmin(inside))
            raise EmbeddingError(f"F maps {tuple(pts[k])} to {tuple(q[k])}, outside {self.target.name}")
        return q

    def jacobian(self, points) -> np.ndarray:
        return eval_array(self.J, coerce_points(points))

    def pushforward_at(self, p, v) -> np.ndarray:
        """Target components of ``f_*(v)`` at ``F(p)`` for a source tangent vector ``v`` at ``p``."""
        p = np.asarray(p, dtype=float)
        self.base_map(p[None])
        return self.jacobian(p[None])[0] @ np.asarray(v, dtype=float)


def pushforward_at(E: Embedding, p, v) -> np.ndarray:
    return E.pushforward_at(p, v)


@dataclass
class SampleSet:
    """Source points and per-point coefficient-bounded tangent vectors."""

    points: np.ndarray        # (n, d)
    X: np.ndarray             # (n, m, d)
    Y: np.ndarray
    W: np.ndarray
    seed: int
    bound: float
    window: tuple[float, float]

    @property
    def count(self) -> int:
        return self.X.shape[0] * self.X.shape[1]

    def config(self) -> dict:
        return {"points": int(self.points.shape[0]), "vectors_per_point": int(self.X.shape[1]),
                "coefficient_bound": self.bound, "window": list(self.window), "seed": self.seed}


def make_samples(E: Embedding, n_points: int = 500, n_pairs: int = 200, seed: int = 42,
                 bound: float = 1.0, window: tuple[float, float] = (-5.0, 5.0)) -> SampleSet:
    pts = sample_points(E.source, n_points, seed, window=window)
    X, Y, W = sample_vectors(n_points, n_pairs, E.dim, seed, bound=bound, count=3)
    return SampleSet(pts, X, Y, W, seed, bound, window)


@dataclass
class _Context:
    """Per-point quantities shared by the inequality checks."""

    E: Embedding
    pts: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    J: np.ndarray

    @classmethod
    def build(cls, E: Embedding, pts) -> "_Context":
        pts = coerce_points(pts)
        q = E.base_map(pts)
        return cls(E, pts, E.source.metric_at(pts), E.target.metric_at(q), E.jacobian(pts))

    def push(self, V):
        return np.einsum("nij,nmj->nmi", self.J, V)

    def g1_(self, X, Y):
        return np.einsum("nmi,nij,nmj->nm", X, self.g1, Y)

    def g2_(self, U, V):
        return np.einsum("nmi,nij,nmj->nm", U, self.g2, V)

    def gpush(self, X, Y):
        return self.g2_(self.push(X), self.push(Y))


def sandwich_values(E: Embedding, points, X, Y) -> tuple[np.ndarray, np.ndarray]:
    """``u = g1(X,Y)|_p`` and ``v = g2(f_*X, f_*Y)|_F(p)``, each shaped (n, m)."""
    ctx = _Context.build(E, points)
    return ctx.g1_(X, Y), ctx.gpush(X, Y)


def _sandwich_report(check_id, lower, middle, upper, tol, samples: SampleSet | None, hyps=(),
                     extra_config=None, metrics=None, n=None) -> CheckReport:
    lo_v = float(np.max(lower - middle)) if lower is not None else None
    up_v = float(np.max(middle - upper)) if upper is not None else None
    conclusion = sandwich_verdict(lo_v, up_v, tol)
    hyps = list(hyps)
    holds = all(h.holds for h in hyps if h.gating)
    verdict = conclusion if holds else NOT_APPLICABLE
    config = dict(samples.config()) if samples is not None else {}
    config.update(extra_config or {})
    count = int(np.size(middle)) if n is None else n
    return CheckReport(check_id, verdict, lo_v, up_v, hyps, count,
                       samples.seed if samples is not None else None, tol, conclusion,
                       metrics or {}, config)


def check_embedding(E: Embedding, samples: SampleSet, tol: float = SANDWICH_TOL) -> CheckReport:
    """Check (1/A) g1(X,Y) - B <= g2(f_*X, f_*Y) <= A g1(X,Y) + B on every sample."""
    u, v = sandwich_values(E, samples.points, samples.X, samples.Y)
    A, B = E.A, E.B
    empty = int(np.sum(u / A - B > A * u + B))
    return _sandwich_report("embedding", u / A - B, v, A * u + B, tol, samples,
                            extra_config={"A": A, "B": B},
                            metrics={"min_u": float(u.min()), "max_u": float(u.max()),
                                     "empty_interval_samples": empty})


# ---------------------------------------------------------------------------
# Constant estimation


def b_min(A: float, u: np.ndarray, v: np.ndarray) -> float:
    """Smallest B making (A, B) feasible on the samples."""
    return max(0.0, float(np.max(v - A * u)), float(np.max(u / A - v)))


@dataclass(frozen=True)
class ConstantEstimate:
    A: float
    B: float
    resolution: float


def best_constants(u, v, a_range: tuple[float, float] = A_RANGE,
                   refinements: int = REFINEMENTS) -> ConstantEstimate:
    """Grid search for the A minimising B_min(A), refined ``refinements`` times (x10 each).

    Ties go to the smaller A. B_min need not be unimodal, so this is a
    feasible heuristic rather than a certified optimum.
    """
    u = np.ravel(u)
    v = np.ravel(v)
    lo, hi = a_range
    step = 1.0
    grid = np.arange(lo, hi + 0.5 * step, step)
    best_a = lo
    for level in range(refinements + 1):
        values = [b_min(a, u, v) for a in grid]
        k = int(np.argmin(values))  # first minimum = smallest A on ties
        best_a = float(grid[k])
        if level == refinements:
            break
        a_lo, a_hi = max(lo, best_a - step), min(hi, best_a + step)
        step /= 10.0
        grid = np.round(np.arange(a_lo, a_hi + 0.5 * step, step), 12)
        grid = grid[(grid >= lo) & (grid <= hi)]
    return ConstantEstimate(best_a, b_min(best_a, u, v), step)


def estimate_constants(E: Embedding, samples: SampleSet) -> ConstantEstimate:
    u, v = sandwich_values(E, samples.points, samples.X, samples.Y)
    return best_constants(u, v)


# ---------------------------------------------------------------------------
# Quasi-density


@dataclass(frozen=True)
class QuasiDenseResult:
    D_star: float
    declared_D: float | None
    verdict: str | None
    worst_field: int

    def report(self, points: int, seed=None) -> CheckReport:
        verdict = self.verdict if self.verdict is not None else NOT_APPLICABLE
        hyps = [Hypothesis("declared_D", self.declared_D is not None,
                           "D given in the embedding" if self.declared_D is not None else "no D declared")]
        viol = None if self.declared_D is None else self.D_star - self.declared_D
        return CheckReport("quasi_dense", verdict, None, viol, hyps, points, seed, 0.0,
                           self.verdict, {"D_star": self.D_star, "declared_D": self.declared_D,
                                          "worst_field": self.worst_field})


def field_pool(dim: int, size: int, seed: int, bound: float = 1.0, include_zero: bool = False) -> np.ndarray:
    """Constant-coefficient fields: +-coordinate fields followed by seeded random ones."""
    eye = np.eye(dim) * bound
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF1E1D]))
    parts = [eye, -eye, rng.uniform(-bound, bound, size=(max(size, 0), dim))]
    if include_zero:
        parts.insert(0, np.zeros((1, dim)))
    return np.vstack(parts)


def check_quasi_dense(E: Embedding, Z: np.ndarray, X: np.ndarray, points) -> QuasiDenseResult:
    """D* = max over Z of min over X of sup over points of g2(Z, f_*X)."""
    ctx = _Context.build(E, points)
    pushed = np.einsum("nij,xj->nxi", ctx.J, X)
    ip = np.einsum("zi,nij,nxj->zxn", Z, ctx.g2, pushed)
    sup_p = ip.max(axis=2)
    best_x = sup_p.min(axis=1)
    worst = int(np.argmax(best_x))
    D_star = float(best_x[worst])
    verdict = None
    if E.D is not None:
        verdict = PASS if D_star <= E.D else FAIL
    return QuasiDenseResult(D_star, E.D, verdict, worst)


# ---------------------------------------------------------------------------
# Theorem suite

THEOREM_IDS = ("T3.1.1", "T3.1.2", "T3.1.3", "T3.1.4", "T4.1", "C4.1", "C4.2", "T4.2",
               "T4.3", "T4.4", "R4.1", "T5.2.1", "T5.2.2", "T6.1")


@dataclass
class _Facts:
    """Lazily computed hypotheses about the source (and target) at the sample points."""

    E: Embedding
    pts: np.ndarray
    cache: dict = field(default_factory=dict)

    def _get(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]

    @property
    def bundle(self) -> CurvatureBundle:
        return self._get("bundle", lambda: st.source_curvature(self.E.source, self.pts))

    def nk(self) -> st.NkResult:
        return self._get("nk", lambda: st.classify_nk(self.E.source_structure, self.pts, bundle=self.bundle))

    def target_nk(self) -> st.NkResult | None:
        def run():
            q = self.E.base_map(self.pts)
            try:
                return st.classify_nk(self.E.target_structure, q)
            except Exception:  # target curvature may be unavailable
                return None
        return self._get("target_nk", run)

    def flat(self, kind):
        return self._get(("flat", kind), lambda: flatness_test(kind, self.E.source, self.pts, bundle=self.bundle))

    def einstein(self):
        return self._get("einstein", lambda: einstein_fit(self.E.source, self.pts, bundle=self.bundle))

    def sasakian(self):
        return self._get("sasakian", lambda: st.verify_sasakian(self.E.source_structure, self.pts,
                                                                bundle=self.bundle))

    def preserving(self):
        return self._get("preserving", lambda: st.check_structure_preserving(self.E, self.pts))

    # hypotheses --------------------------------------------------------------

    def h_nk(self) -> Hypothesis:
        r = self.nk()
        detail = f"k={r.k:.12g}, residual={r.residual:.3g}" if r.k is not None else r.status
        return Hypothesis("source_nullity_k", r.is_nk, detail)

    def h_flat(self, kind) -> Hypothesis:
        r = self.flat(kind)
        return Hypothesis(f"source_{kind}_flat", r.flat, f"max residual {r.max_residual:.3g}")

    def h_einstein(self) -> Hypothesis:
        r = self.einstein()
        return Hypothesis("source_einstein", r.einstein, f"a={r.a:.12g}, residual={r.residual:.3g}")

    def h_sasakian(self) -> Hypothesis:
        r = self.sasakian()
        return Hypothesis("source_sasakian", r.passed, f"residual {r.metrics['residual']:.3g}")

    def h_preserving(self) -> Hypothesis:
        if self.E.source_structure is None or self.E.target_structure is None:
            return Hypothesis("structure_preserving", False, "both manifolds need a contact structure")
        r = self.preserving()
        return Hypothesis("structure_preserving", r.passed, f"max norm {r.metrics['residual']:.3g}")

    def h_target_same_k(self) -> Hypothesis:
        src, tgt = self.nk(), self.target_nk()
        if tgt is None or not tgt.is_nk or src.k is None:
            return Hypothesis("target_same_k", False, "target is not N(k) or could not be classified",
                              gating=False)
        same = abs(tgt.k - src.k) <= max(src.tol, tgt.tol)
        return Hypothesis("target_same_k", same, f"target k={tgt.k:.12g}", gating=False)


def _k(facts: _Facts) -> float:
    r = facts.nk()
    return r.k if r.k is not None else math.nan


def _eta_r(ctx, bundle, eta1, X, Y, W):
    """eta_1(R_1(Y,X)W) for every sample."""
    return np.einsum("nl,nlijk,nmi,nmj,nmk->nm", eta1, bundle.riemann, Y, X, W)


def _nk_middle(ctx, eta1, X, Y, W, k):
    ex = np.einsum("ni,nmi->nm", eta1, X)
    ey = np.einsum("ni,nmi->nm", eta1, Y)
    return k * (ey * ctx.gpush(X, W) - ex * ctx.gpush(Y, W))


def check_theorem(theorem_id: str, E: Embedding, samples: SampleSet, tol: float = SANDWICH_TOL,
                  force: bool = False) -> CheckReport:
    """Check hypotheses, then the conclusion of one theorem on every sample.

    When a gating hypothesis fails the verdict is ``not-applicable``; the
    conclusion is still evaluated when ``force`` is set (and is reported in
    ``conclusion``).
    """
    if theorem_id not in THEOREM_IDS:
        raise KeyError(f"unknown theorem id {theorem_id!r}; choose from {', '.join(THEOREM_IDS)}")
    pts = samples.points
    facts = _Facts(E, pts)
    A, B = E.A, E.B
    d = E.dim
    n_half = (d - 1) / 2
    needs_structure = theorem_id != "T6.1"
    if needs_structure and E.source_structure is None:
        raise EmbeddingError(f"{theorem_id} needs a contact structure on the source")
    if theorem_id in ("T3.1.1", "C4.1") and E.target_structure is None:
        raise EmbeddingError(f"{theorem_id} needs a contact structure on the target")

    hyps: list[Hypothesis]
    hyp_builders: dict[str, Callable[[], list[Hypothesis]]] = {
        "T3.1.1": lambda: [facts.h_preserving()],
        "T3.1.2": lambda: [facts.h_preserving()],
        "T3.1.3": lambda: [facts.h_preserving()],
        "T3.1.4": lambda: [facts.h_preserving()],
        "T4.1": lambda: [facts.h_nk(), facts.h_flat("weyl"), facts.h_target_same_k()],
        "C4.1": lambda: [facts.h_nk(), facts.h_preserving()],
        "C4.2": lambda: [facts.h_nk(), facts.h_flat("weyl"), facts.h_einstein()],
        "T4.2": lambda: [facts.h_nk(), facts.h_flat("concircular")],
        "T4.3": lambda: [facts.h_nk(), facts.h_flat("conharmonic"), facts.h_einstein()],
        "T4.4": lambda: [facts.h_nk(), facts.h_flat("projective"), facts.h_einstein()],
        "R4.1": lambda: [facts.h_nk(), facts.h_flat("weyl"),
                         Hypothesis("declared_D", E.D is not None, f"D={E.D}")],
        "T5.2.1": lambda: [facts.h_sasakian(), _any_flat(facts)],
        "T5.2.2": lambda: [facts.h_sasakian(), facts.h_flat("conharmonic"), facts.h_einstein()],
        "T6.1": lambda: [],
    }
    hyps = hyp_builders[theorem_id]() + [_h_embedding(E, samples, tol)]
    base_config = {"A": A, "B": B, "theorem": theorem_id, "forced": force}
    if not all(h.holds for h in hyps if h.gating) and not force:
        return CheckReport(theorem_id, NOT_APPLICABLE, None, None, hyps, samples.count, samples.seed,
                           tol, None, {}, {**samples.config(), **base_config})

    ctx = _Context.build(E, pts)
    X, Y, W = samples.X, samples.Y, samples.W
    metrics: dict = {}

    if theorem_id == "T6.1":
        cb = facts.bundle
        frame = E.source.orthonormal_frame(pts)  # columns e_i
        # R(e_i, e_j) e_j for all i, j -> components [n, i, j, l]
        Rv = np.einsum("nlabc,nai,nbj,ncj->nijl", cb.riemann, frame, frame, frame)
        pushed_R = np.einsum("nkl,nijl->nijk", ctx.J, Rv)
        pushed_e = np.einsum("nkl,nli->nik", ctx.J, frame)
        total = np.einsum("nijk,nkm,nim->n", pushed_R, ctx.g2, pushed_e)
        r1 = cb.scalar
        lower = r1 / A - d * d * B
        upper = A * r1 + d * d * B
        metrics = {"frame_sum_min": float(total.min()), "frame_sum_max": float(total.max()),
                   "scalar_min": float(r1.min()), "scalar_max": float(r1.max()),
                   "lower_bound_min": float(lower.min()), "upper_bound_max": float(upper.max()),
                   "frame_sum": [float(t) for t in total],
                   "max_abs_frame_sum_minus_scalar": float(np.max(np.abs(total - r1)))}
        return _sandwich_report(theorem_id, lower, total, upper, tol, samples, hyps, base_config,
                                metrics, n=len(pts))

    S1 = E.source_structure
    f1 = S1.fields(pts)
    eta1 = f1.eta
    ex = np.einsum("ni,nmi->nm", eta1, X)
    ey = np.einsum("ni,nmi->nm", eta1, Y)
    g1xy = ctx.g1_(X, Y)

    if theorem_id in ("T3.1.1", "T3.1.4", "C4.1"):
        q = E.base_map(pts)
        f2 = E.target_structure.fields(q)
        eta2_push = lambda V: np.einsum("ni,nmi->nm", f2.eta, ctx.push(V))  # noqa: E731

    if theorem_id == "T3.1.1":
        middle = eta2_push(X)
        return _sandwich_report(theorem_id, ex / A - B, middle, A * ex + B, tol, samples, hyps, base_config)
    if theorem_id == "T3.1.2":
        phiX = np.einsum("nij,nmj->nmi", f1.phi, X)
        middle = ctx.gpush(phiX, X)
        return _sandwich_report(theorem_id, -B * np.ones_like(middle), middle, B * np.ones_like(middle),
                                tol, samples, hyps, base_config)
    if theorem_id == "T3.1.3":
        phiX = np.einsum("nij,nmj->nmi", f1.phi, X)
        phiY = np.einsum("nij,nmj->nmi", f1.phi, Y)
        middle = ctx.gpush(phiX, phiY) + ex * ey / A
        return _sandwich_report(theorem_id, g1xy / A - B, middle, A * g1xy + B, tol, samples, hyps,
                                base_config)
    if theorem_id == "T3.1.4":
        middle = (ctx.gpush(X, Y) - ex * eta2_push(Y) - ey * eta2_push(X)
                  + ex * ey * (1.0 + 1.0 / A))
        return _sandwich_report(theorem_id, g1xy / A - B, middle, A * g1xy + B, tol, samples, hyps,
                                base_config)

    k = _k(facts)
    metrics["k"] = k
    tnk = facts.target_nk() if theorem_id == "T4.1" else None
    if tnk is not None and tnk.k is not None:
        metrics["target_k"] = tnk.k
    cb = facts.bundle
    r = cb.scalar[:, None]

    if theorem_id == "C4.1":
        q = E.base_map(pts)
        xi2 = E.target_structure.fields(q).xi
        gx = np.einsum("nmi,nij,nj->nm", ctx.push(X), ctx.g2, xi2)
        gy = np.einsum("nmi,nij,nj->nm", ctx.push(Y), ctx.g2, xi2)
        middle = ey * gx - ex * gy
        B1 = B / abs(k) if k not in (0.0,) and math.isfinite(k) else math.inf
        metrics["B1"] = B1
        return _sandwich_report(theorem_id, -B1 * np.ones_like(middle), middle, B1 * np.ones_like(middle),
                                tol, samples, hyps, base_config, metrics)

    q_eta = _eta_r(ctx, cb, eta1, X, Y, W)
    if theorem_id == "R4.1":
        D = E.D if E.D is not None else math.nan
        gxw = ctx.gpush(X, W)
        gyw = ctx.gpush(Y, W)
        premise = (gxw <= D) & (gyw <= D)
        rhs = k * D * (ey - ex)
        lower = np.where(premise, q_eta / A - B, -np.inf)
        metrics["premise_samples"] = int(premise.sum())
        if not premise.any():
            hyps.append(Hypothesis("premise_samples", False, "no sampled W satisfies the bound premise"))
            return _sandwich_report(theorem_id, None, rhs, None, tol, samples, hyps, base_config, metrics)
        return _sandwich_report(theorem_id, lower, rhs, None, tol, samples, hyps, base_config, metrics)

    coef = 1.0
    middle = _nk_middle(ctx, eta1, X, Y, W, k)
    if theorem_id == "C4.2":
        coef = (2 * n_half * k - r / (2 * n_half) + r / (2 * n_half + 1)) / (k * (2 * n_half - 1))
    elif theorem_id == "T4.2":
        coef = r / (2 * n_half * k * (2 * n_half + 1))
    elif theorem_id in ("T4.3", "T5.2.2"):
        coef = 4 * n_half / (2 * n_half - 1)
    if theorem_id in ("T5.2.1", "T5.2.2"):
        middle = _nk_middle(ctx, eta1, X, Y, W, 1.0)
    coef_arr = np.broadcast_to(np.asarray(coef, dtype=float), q_eta.shape) if np.ndim(coef) else \
        np.full(q_eta.shape, float(coef))
    metrics["coefficient_min"] = float(np.min(coef_arr))
    metrics["coefficient_max"] = float(np.max(coef_arr))
    lower = coef_arr * q_eta / A - B
    upper = coef_arr * A * q_eta + B
    metrics["empty_interval_samples"] = int(np.sum(lower > upper))
    return _sandwich_report(theorem_id, lower, middle, upper, tol, samples, hyps, base_config, metrics)


def _h_embedding(E: Embedding, samples: SampleSet, tol: float) -> Hypothesis:
    """Whether (A, B) satisfy the defining sandwich on these samples; informational only."""
    r = check_embedding(E, samples, tol)
    return Hypothesis("quasi_isometric_embedding", r.passed,
                      f"lower {r.max_lower_violation:.3g}, upper {r.max_upper_violation:.3g}", gating=False)


def _any_flat(facts: _Facts) -> Hypothesis:
    flats = {kind: facts.flat(kind) for kind in ("weyl", "concircular", "projective")}
    which = [k for k, f in flats.items() if f.flat]
    return Hypothesis("source_conformally_concircularly_or_projectively_flat", bool(which),
                      "flat: " + (", ".join(which) if which else "none"))
