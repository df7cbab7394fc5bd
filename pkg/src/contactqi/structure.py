"""Almost contact metric structures: axioms, contact condition, N(k) and Sasakian tests.

Residuals are measured on components in the Gram-Schmidt orthonormal frame of
the metric, which makes tolerances independent of how the chart scales the
metric (near a coordinate singularity the raw components can be huge).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .curvature import CurvatureBundle, curvature, frame_components
from .expr import Expr, differentiate
from .manifold import ChartManifold, coerce_points, eval_array
from .reports import FAIL, INDETERMINATE, PASS, CheckReport, residual_report

AXIOM_TOL = 1e-8
CONTACT_TOL = 1e-8
NK_TOL = 1e-6
SASAKIAN_TOL = 1e-7
PRESERVE_TOL = 1e-8

AXIOMS = ("phi_squared", "eta_xi", "phi_xi", "eta_phi", "rank_phi", "eta_dual", "compatible")


class StructureFields(NamedTuple):
    phi: np.ndarray   # [n, i, j]: component i of phi(d_j)
    xi: np.ndarray    # [n, i]
    eta: np.ndarray   # [n, i]


class StructureJet(NamedTuple):
    dphi: np.ndarray  # [n, k, i, j] = d_k phi^i_j
    dxi: np.ndarray   # [n, k, i] = d_k xi^i
    deta: np.ndarray  # [n, k, i] = d_k eta_i


@dataclass(frozen=True, eq=False)
class ContactStructure:
    base: ChartManifold
    phi: tuple[tuple[Expr, ...], ...]
    xi: tuple[Expr, ...]
    eta: tuple[Expr, ...]

    def __post_init__(self):
        d = self.base.dim
        if len(self.xi) != d or len(self.eta) != d or len(self.phi) != d \
                or any(len(row) != d for row in self.phi):
            raise ValueError(f"structure tensors must match dimension {d}")

    @property
    def dim(self) -> int:
        return self.base.dim

    def fields(self, points) -> StructureFields:
        pts = coerce_points(points)
        return StructureFields(eval_array(self.phi, pts), eval_array(self.xi, pts),
                               eval_array(self.eta, pts))

    def _d(self, exprs):
        return [[differentiate(e, c) for e in np.asarray(exprs, dtype=object).ravel()]
                for c in self.base.coords]

    def jet(self, points) -> StructureJet:
        pts = coerce_points(points)
        n, d = len(pts), self.dim
        dphi = eval_array(self._cached_derivs[0], pts).reshape(n, d, d, d)
        dxi = eval_array(self._cached_derivs[1], pts).reshape(n, d, d)
        deta = eval_array(self._cached_derivs[2], pts).reshape(n, d, d)
        return StructureJet(dphi, dxi, deta)

    @property
    def _cached_derivs(self):
        cache = self.__dict__.get("_derivs")
        if cache is None:
            cache = (self._d(self.phi), self._d(self.xi), self._d(self.eta))
            object.__setattr__(self, "_derivs", cache)
        return cache


@lru_cache(maxsize=16)
def _curvature_cached(M: ChartManifold, shape: tuple, raw: bytes) -> CurvatureBundle:
    return curvature(M, np.frombuffer(raw).reshape(shape))


def source_curvature(M: ChartManifold, points) -> CurvatureBundle:
    """Curvature at ``points``, memoised on (manifold, points)."""
    pts = np.ascontiguousarray(coerce_points(points))
    return _curvature_cached(M, pts.shape, pts.tobytes())


def _frame_fields(S: ContactStructure, pts):
    f = S.fields(pts)
    frame = S.base.orthonormal_frame(pts)
    phi = frame_components(f.phi, "ud", frame)
    xi = frame_components(f.xi, "u", frame)
    eta = frame_components(f.eta, "d", frame)
    return f, frame, phi, xi, eta


def verify_axioms(S: ContactStructure, points, tol: float = AXIOM_TOL) -> list[CheckReport]:
    """Evaluate the seven almost contact metric axioms; one report per axiom."""
    pts = coerce_points(points)
    n, d = len(pts), S.dim
    f, frame, phi, xi, eta = _frame_fields(S, pts)
    eye = np.eye(d)
    rows = []

    r = np.einsum("nij,njk->nik", phi, phi) + eye - np.einsum("ni,nj->nij", xi, eta)
    rows.append(residual_report("phi_squared", np.max(np.abs(r)), tol, n))
    r = np.einsum("ni,ni->n", f.eta, f.xi) - 1.0
    rows.append(residual_report("eta_xi", np.max(np.abs(r)), tol, n))
    r = np.einsum("nij,nj->ni", phi, xi)
    rows.append(residual_report("phi_xi", np.max(np.abs(r)), tol, n))
    r = np.einsum("ni,nij->nj", eta, phi)
    rows.append(residual_report("eta_phi", np.max(np.abs(r)), tol, n))

    sv = np.linalg.svd(phi, compute_uv=False)  # descending
    thresh = math.sqrt(tol)
    smallest = float(np.max(sv[:, -1]))
    second = float(np.min(sv[:, -2])) if d > 1 else math.inf
    ok = smallest <= thresh and second > thresh
    rows.append(CheckReport("rank_phi", PASS if ok else FAIL, samples=n, tol=tol,
                            conclusion=PASS if ok else FAIL,
                            metrics={"residual": smallest, "max_smallest_singular": smallest,
                                     "min_second_smallest_singular": second,
                                     "expected_rank": d - 1, "threshold": thresh}))

    r = eta - xi  # g(X, xi) in an orthonormal frame is the frame components of xi
    rows.append(residual_report("eta_dual", np.max(np.abs(r)), tol, n))
    r = (np.einsum("nki,nkj->nij", phi, phi) - eye + np.einsum("ni,nj->nij", eta, eta))
    rows.append(residual_report("compatible", np.max(np.abs(r)), tol, n))
    return rows


def axioms_pass(rows: list[CheckReport]) -> bool:
    return all(r.passed for r in rows)


def d_eta(deta: np.ndarray) -> np.ndarray:
    """Components of d(eta) on coordinate fields, with the factor 1/2:

    d eta(X, Y) = 1/2 (X eta(Y) - Y eta(X) - eta([X, Y])).
    """
    return 0.5 * (deta - np.swapaxes(deta, 1, 2))


def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def contact_form_coefficient(S: ContactStructure, points) -> np.ndarray:
    """Coefficient of eta ^ (d eta)^n on d x^1 ^ ... ^ d x^(2n+1) at each point."""
    pts = coerce_points(points)
    d = S.dim
    if d % 2 == 0:
        raise ValueError("contact forms need odd dimension")
    nn = (d - 1) // 2
    eta = S.fields(pts).eta
    om = d_eta(S.jet(pts).deta)
    total = np.zeros(len(pts))
    for perm in itertools.permutations(range(d)):
        term = _perm_sign(perm) * eta[:, perm[0]]
        for k in range(nn):
            term = term * om[:, perm[2 * k + 1], perm[2 * k + 2]]
        total += term
    return total / 2 ** nn


def verify_contact(S: ContactStructure, points, tol: float = CONTACT_TOL) -> CheckReport:
    pts = coerce_points(points)
    coef = contact_form_coefficient(S, pts)
    vol = np.sqrt(np.linalg.det(S.base.metric_at(pts)))
    m = float(np.min(np.abs(coef)))
    ok = m >= tol
    return CheckReport("contact", PASS if ok else FAIL, samples=len(pts), tol=tol,
                       conclusion=PASS if ok else FAIL,
                       metrics={"min_abs_coefficient": m, "max_abs_coefficient": float(np.max(np.abs(coef))),
                                "min_abs_coefficient_per_volume": float(np.min(np.abs(coef) / vol))})


@dataclass(frozen=True)
class NkResult:
    status: str          # "nk", "not-nk" or "indeterminate"
    k: float | None
    residual: float
    tol: float

    @property
    def is_nk(self) -> bool:
        return self.status == "nk"

    def report(self, samples: int) -> CheckReport:
        verdict = {"nk": PASS, "not-nk": FAIL}.get(self.status, INDETERMINATE)
        return CheckReport("nullity_k", verdict, samples=samples, tol=self.tol, conclusion=verdict,
                           metrics={"k": self.k, "residual": self.residual, "status": self.status})


def _frame_curvature(S: ContactStructure, pts, bundle=None):
    cb = bundle if bundle is not None else source_curvature(S.base, pts)
    f, frame, phi, xi, eta = _frame_fields(S, pts)
    R = cb.riemann_in_frame(frame)
    return cb, R, phi, xi, eta


def classify_nk(S: ContactStructure, points, tol: float = NK_TOL, *, bundle=None) -> NkResult:
    """Least-squares k for R(X,Y)xi = k[eta(Y)X - eta(X)Y] over all index pairs and points."""
    pts = coerce_points(points)
    _, R, _, xi, eta = _frame_curvature(S, pts, bundle)
    d = S.dim
    eye = np.eye(d)
    lhs = np.einsum("nlijk,nk->nijl", R, xi)
    basis = np.einsum("nj,il->nijl", eta, eye) - np.einsum("ni,jl->nijl", eta, eye)
    denom = float(np.sum(basis * basis))
    if denom <= 1e-12 * lhs.size:
        return NkResult("indeterminate", None, math.inf, tol)
    k = float(np.sum(lhs * basis) / denom)
    residual = float(np.max(np.abs(lhs - k * basis)))
    return NkResult("nk" if residual <= tol else "not-nk", k, residual, tol)


def nk_identities(S: ContactStructure, points, k: float, *, bundle=None) -> dict[str, float]:
    """Residuals of Q xi = 2nk xi, S(X, xi) = 2nk eta(X) and
    eta(R(X,Y)Z) = k[eta(X)g(Y,Z) - eta(Y)g(X,Z)] in an orthonormal frame."""
    pts = coerce_points(points)
    cb, R, _, xi, eta = _frame_curvature(S, pts, bundle)
    frame = S.base.orthonormal_frame(pts)
    Q = frame_components(cb.ricci_op, "ud", frame)
    Sr = frame_components(cb.ricci, "dd", frame)
    two_nk = (S.dim - 1) * k
    eye = np.eye(S.dim)
    r_q = np.einsum("nij,nj->ni", Q, xi) - two_nk * xi
    r_s = np.einsum("nij,nj->ni", Sr, xi) - two_nk * eta
    lhs = np.einsum("nl,nlijk->nijk", eta, R)
    rhs = k * (np.einsum("ni,jk->nijk", eta, eye) - np.einsum("nj,ik->nijk", eta, eye))
    return {"ricci_op_xi": float(np.max(np.abs(r_q))),
            "ricci_xi": float(np.max(np.abs(r_s))),
            "eta_of_curvature": float(np.max(np.abs(lhs - rhs)))}


def sasakian_identities(S: ContactStructure, points, *, bundle=None) -> dict[str, float]:
    """Residuals of the three curvature identities every Sasakian manifold satisfies."""
    pts = coerce_points(points)
    _, R, _, xi, eta = _frame_curvature(S, pts, bundle)
    eye = np.eye(S.dim)
    # R(X,Y)xi = eta(Y)X - eta(X)Y
    a = np.einsum("nlijk,nk->nijl", R, xi)
    a_rhs = np.einsum("nj,il->nijl", eta, eye) - np.einsum("ni,jl->nijl", eta, eye)
    # R(X,xi)Y = eta(Y)X - g(X,Y)xi
    b = np.einsum("nlijk,nj->nikl", R, xi)
    b_rhs = np.einsum("nk,il->nikl", eta, eye) - np.einsum("ik,nl->nikl", eye, xi)
    # eta(R(X,Y)Z) = eta(X)g(Y,Z) - eta(Y)g(X,Z)
    c = np.einsum("nl,nlijk->nijk", eta, R)
    c_rhs = np.einsum("ni,jk->nijk", eta, eye) - np.einsum("nj,ik->nijk", eta, eye)
    return {"curvature_xi": float(np.max(np.abs(a - a_rhs))),
            "curvature_xi_middle": float(np.max(np.abs(b - b_rhs))),
            "eta_of_curvature": float(np.max(np.abs(c - c_rhs)))}


def covariant_derivatives(S: ContactStructure, points, *, bundle=None):
    """Coordinate components of nabla phi and nabla xi.

    Returns ``(nphi, nxi)`` with ``nphi[n, k, i, j] = (nabla_k phi)^i_j`` and
    ``nxi[n, k, i] = nabla_k xi^i``.
    """
    pts = coerce_points(points)
    cb = bundle if bundle is not None else source_curvature(S.base, pts)
    f = S.fields(pts)
    jet = S.jet(pts)
    G = cb.christoffel
    nphi = (jet.dphi + np.einsum("nikm,nmj->nkij", G, f.phi)
            - np.einsum("nmkj,nim->nkij", G, f.phi))
    nxi = jet.dxi + np.einsum("nikm,nm->nki", G, f.xi)
    return nphi, nxi


def verify_sasakian(S: ContactStructure, points, tol: float = SASAKIAN_TOL, *, bundle=None) -> CheckReport:
    """Compare nabla phi with g(X,Y)xi - eta(Y)X and nabla xi with -phi."""
    pts = coerce_points(points)
    cb = bundle if bundle is not None else source_curvature(S.base, pts)
    f = S.fields(pts)
    nphi, nxi = covariant_derivatives(S, pts, bundle=cb)
    d = S.dim
    target = (np.einsum("nkj,ni->nkij", cb.g, f.xi)
              - np.einsum("nj,ik->nkij", f.eta, np.eye(d)))
    frame = S.base.orthonormal_frame(pts)
    r_phi = float(np.max(np.abs(frame_components(nphi - target, "dud", frame))))
    r_xi = float(np.max(np.abs(frame_components(nxi + np.swapaxes(f.phi, 1, 2), "du", frame))))
    rep = residual_report("sasakian", max(r_phi, r_xi), tol, len(pts),
                          nabla_phi_residual=r_phi, nabla_xi_residual=r_xi)
    return rep


def check_structure_preserving(E, points, tol: float = PRESERVE_TOL) -> CheckReport:
    """Is the pushforward of the source Reeb field the target Reeb field?

    Measured as the target-metric norm of ``f_*(xi_1)|_p - xi_2|_F(p)``.
    """
    pts = coerce_points(points)
    if E.source_structure is None or E.target_structure is None:
        raise ValueError("both manifolds need a contact structure")
    q = E.base_map(pts)
    J = E.jacobian(pts)
    xi1 = E.source_structure.fields(pts).xi
    xi2 = E.target_structure.fields(q).xi
    diff = np.einsum("nij,nj->ni", J, xi1) - xi2
    g2 = E.target.metric_at(q)
    norms = np.sqrt(np.maximum(np.einsum("ni,nij,nj->n", diff, g2, diff), 0.0))
    m = float(np.max(norms))
    return residual_report("structure_preserving", m, tol, len(pts))
