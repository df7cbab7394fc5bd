"""Levi-Civita curvature from a chart metric, derived tensors, flatness and Einstein fits.

Conventions: ``R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`` with
``(R(d_i, d_j) d_k)^l = riemann[l, i, j, k]``, Ricci ``S_jk = R^i_ijk``, Ricci
operator ``Q^i_j = g^ik S_kj`` and scalar curvature ``r = g^jk S_jk``.
All arrays carry a leading point axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .manifold import ChartManifold, coerce_points, eval_array

FLAT_TOL = 1e-7
FIT_TOL = 1e-6

Kind = Literal["weyl", "concircular", "conharmonic", "projective"]
KINDS: tuple[str, ...] = ("weyl", "concircular", "conharmonic", "projective")


@dataclass(frozen=True)
class CurvatureBundle:
    points: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray  # [n, k, i, j] = Gamma^k_ij
    riemann: np.ndarray      # [n, l, i, j, k] = R^l_ijk
    ricci: np.ndarray        # [n, j, k] = S_jk
    ricci_op: np.ndarray     # [n, i, j] = Q^i_j
    scalar: np.ndarray       # [n]
    frame_riemann: np.ndarray | None = None  # R in the manifold's orthonormal frame, when computed natively

    @property
    def dim(self) -> int:
        return self.g.shape[-1]

    def lowered_riemann(self) -> np.ndarray:
        """R_lijk = g_lm R^m_ijk."""
        return np.einsum("nlm,nmijk->nlijk", self.g, self.riemann)

    def at(self, index: int) -> "CurvatureBundle":
        sl = slice(index, index + 1)
        return CurvatureBundle(*(None if getattr(self, f) is None else getattr(self, f)[sl]
                                 for f in self.__dataclass_fields__))

    def riemann_in_frame(self, frame: np.ndarray) -> np.ndarray:
        """R^e_abc in the orthonormal frame ``frame`` (the native one when available)."""
        if self.frame_riemann is not None:
            return self.frame_riemann
        return frame_components(self.riemann, "uddd", frame)


def _frame_riemann(M: ChartManifold, pts: np.ndarray) -> np.ndarray:
    """R^l_ijk of a frame-specified metric via the orthonormal frame itself.

    Uses the commutator coefficients C^c_ab of the declared frame, the Koszul
    formula for constant frame metrics and then transforms back to coordinates.
    This avoids differentiating coordinate metric entries, which are badly
    scaled wherever the frame is.
    """
    first, second = M._spec_derivs
    E = M.frame_matrix(pts)                       # [n, i, a]
    dE = eval_array(first, pts)                   # [n, k, i, a]
    ddE = eval_array(second, pts)                 # [n, k, m, i, a]
    H = np.linalg.inv(E)                          # [n, a, i]
    # L^i_ab = [f_a, f_b]^i and its coordinate derivatives
    half = np.einsum("nma,nmib->niab", E, dE)
    L = half - np.swapaxes(half, 2, 3)
    dhalf = (np.einsum("nkma,nmib->nkiab", dE, dE)
             + np.einsum("nma,nkmib->nkiab", E, ddE))
    dL = dhalf - np.swapaxes(dhalf, 3, 4)
    dH = -np.einsum("nci,nkij,nja->nkca", H, dE, H)
    C = np.einsum("nci,niab->ncab", H, L)
    dC = np.einsum("nkci,niab->nkcab", dH, L) + np.einsum("nci,nkiab->nkcab", H, dL)
    fC = np.einsum("nka,nkcde->nacde", E, dC)     # f_a(C^c_de)

    def koszul(c):
        # Gamma^c_ab = (C^c_ab - C^a_bc + C^b_ca) / 2, indexed [.., c, a, b]
        return 0.5 * (c - np.einsum("...abc->...cab", c) + np.einsum("...bca->...cab", c))

    gam = koszul(C)                               # [n, c, a, b]: nabla_a f_b = gam[c,a,b] f_c
    fgam = koszul(fC)                             # [n, a, c, d, e] = f_a(gam[c, d, e])
    # R^e_abc = f_a G^e_bc - f_b G^e_ac + G^d_bc G^e_ad - G^d_ac G^e_bd - C^d_ab G^e_dc
    R = (np.einsum("naebc->neabc", fgam) - np.einsum("nbeac->neabc", fgam)
         + np.einsum("ndbc,nead->neabc", gam, gam) - np.einsum("ndac,nebd->neabc", gam, gam)
         - np.einsum("ndab,nedc->neabc", C, gam))
    Sf = np.einsum("naabc->nbc", R)
    Sf = 0.5 * (Sf + np.swapaxes(Sf, 1, 2))
    riemann = np.einsum("nle,neabc,nai,nbj,nck->nlijk", E, R, H, H, H, optimize=True)
    ricci = np.einsum("nbc,nbj,nck->njk", Sf, H, H)
    ricci_op = np.einsum("nib,nbc,ncj->nij", E, Sf, H)
    return riemann, ricci, ricci_op, np.einsum("nbb->n", Sf), R


def curvature(M: ChartManifold, points) -> CurvatureBundle:
    """Curvature data at every point of an (N, dim) array."""
    pts = coerce_points(points)
    g, ginv, dg, ddg = M.metric_jet(pts)
    lower = 0.5 * (np.einsum("nilj->nlij", dg) + np.einsum("njli->nlij", dg) - dg)
    gamma = np.einsum("nkl,nlij->nkij", ginv, lower)
    if M.frame_spec:
        riemann, ricci, ricci_op, scalar, native = _frame_riemann(M, pts)
        return CurvatureBundle(pts, g, ginv, gamma, riemann, ricci, ricci_op, scalar, native)
    # d_m Gamma^k_ij
    dginv = -np.einsum("nka,nmab,nbl->nmkl", ginv, dg, ginv)
    dlower = 0.5 * (np.einsum("nmilj->nmlij", ddg) + np.einsum("nmjli->nmlij", ddg) - ddg)
    dgamma = (np.einsum("nmkl,nlij->nmkij", dginv, lower)
              + np.einsum("nkl,nmlij->nmkij", ginv, dlower))
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    d_term = np.einsum("niljk->nlijk", dgamma)
    riemann = (d_term - np.swapaxes(d_term, 2, 3)
               + np.einsum("nlim,nmjk->nlijk", gamma, gamma)
               - np.einsum("nljm,nmik->nlijk", gamma, gamma))
    return _bundle(pts, g, ginv, gamma, riemann)


def _bundle(pts, g, ginv, gamma, riemann) -> CurvatureBundle:
    ricci = np.einsum("niijk->njk", riemann)
    ricci = 0.5 * (ricci + np.swapaxes(ricci, 1, 2))
    ricci_op = np.einsum("nik,nkj->nij", ginv, ricci)
    scalar = np.einsum("njk,njk->n", ginv, ricci)
    return CurvatureBundle(pts, g, ginv, gamma, riemann, ricci, ricci_op, scalar)


def curvature_at(M: ChartManifold, p) -> CurvatureBundle:
    """Curvature bundle at a single point (arrays keep a length-1 point axis)."""
    return curvature(M, np.atleast_2d(np.asarray(p, dtype=float))[:1])


def _wedge(a_lower, b_vec):
    """Components of the operator  (X,Y)Z -> a(Y,Z) B X - a(X,Z) B Y  as [n,l,i,j,k].

    ``a_lower`` is a (0,2) tensor, ``b_vec`` a (1,1) tensor B^l_i.
    """
    first = np.einsum("njk,nli->nlijk", a_lower, b_vec)
    return first - np.swapaxes(first, 2, 3)


def derived_tensor(kind: str, M: ChartManifold | None = None, points=None, *,
                   bundle: CurvatureBundle | None = None) -> np.ndarray:
    """Weyl, concircular, conharmonic or projective (1,3) tensor, [n, l, i, j, k]."""
    cb = bundle if bundle is not None else curvature(M, points)
    return _assemble(kind, cb.riemann, cb.g, cb.ricci, cb.ricci_op, cb.scalar)


def _assemble(kind, R, g, ricci, ricci_op, scalar):
    m = g.shape[-1]
    if m < 3:
        raise ValueError(f"{kind} tensor needs dimension at least 3, got {m}")
    eye = np.broadcast_to(np.eye(m), g.shape)
    g_id = _wedge(g, eye)          # g(Y,Z)X - g(X,Z)Y
    s_id = _wedge(ricci, eye)      # S(Y,Z)X - S(X,Z)Y
    g_q = _wedge(g, ricci_op)      # g(Y,Z)QX - g(X,Z)QY
    r = scalar[:, None, None, None, None]
    if kind == "weyl":
        return R - (s_id + g_q) / (m - 2) + r * g_id / ((m - 1) * (m - 2))
    if kind == "concircular":
        return R - r * g_id / (m * (m - 1))
    if kind == "conharmonic":
        return R - (s_id + g_q) / (m - 2)
    if kind == "projective":
        return R - s_id / (m - 1)
    raise ValueError(f"unknown curvature tensor kind {kind!r}")


def frame_components(tensor: np.ndarray, signature: str, frame: np.ndarray) -> np.ndarray:
    """Express a tensor in an orthonormal frame.

    ``signature`` lists index variance after the point axis, e.g. ``"uddd"`` for
    R^l_ijk; ``frame`` has the frame vectors as columns, shape (n, d, d).
    """
    finv = np.linalg.inv(frame)
    out = tensor
    for pos, kind in enumerate(signature):
        axis = pos + 1
        out = np.moveaxis(out, axis, -1)
        if kind == "u":
            out = np.einsum("n...j,nij->n...i", out, finv)
        else:
            out = np.einsum("n...j,nji->n...i", out, frame)
        out = np.moveaxis(out, -1, axis)
    return out


@dataclass(frozen=True)
class FlatnessResult:
    kind: str
    flat: bool
    max_residual: float
    tol: float


def flatness_test(kind: str, M: ChartManifold, points, tol: float = FLAT_TOL, *,
                  bundle: CurvatureBundle | None = None) -> FlatnessResult:
    """Flat iff every orthonormal-frame component of the derived tensor is within ``tol``."""
    cb = bundle if bundle is not None else curvature(M, points)
    frame = M.orthonormal_frame(cb.points)
    R = cb.riemann_in_frame(frame)
    S = np.einsum("naabc->nbc", R)
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    eye = np.broadcast_to(np.eye(cb.dim), S.shape)
    T = _assemble(kind, R, eye, S, S, np.einsum("nbb->n", S))
    resid = float(np.max(np.abs(T)))
    return FlatnessResult(kind, resid <= tol, resid, tol)


@dataclass(frozen=True)
class EinsteinFit:
    einstein: bool
    eta_einstein: bool
    a: float
    b: float
    residual: float
    tol: float


def einstein_fit(M: ChartManifold, points, eta: np.ndarray | None = None, tol: float = FIT_TOL, *,
                 bundle: CurvatureBundle | None = None) -> EinsteinFit:
    """Least-squares fit S = a g + b eta(x)eta over all frame components at all points.

    ``eta`` is the contact form evaluated at the points, shape (n, d); when it
    is omitted only the Einstein coefficient ``a`` is fitted.
    """
    cb = bundle if bundle is not None else curvature(M, points)
    frame = M.orthonormal_frame(cb.points)
    S = frame_components(cb.ricci, "dd", frame)
    n, d = S.shape[0], cb.dim
    ident = np.broadcast_to(np.eye(d), S.shape)
    cols = [ident.reshape(-1)]
    if eta is not None:
        eh = np.einsum("ni,nij->nj", eta, frame)
        cols.append(np.einsum("ni,nj->nij", eh, eh).reshape(-1))
    design = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(design, S.reshape(-1), rcond=None)
    residual = float(np.max(np.abs(design @ coef - S.reshape(-1)))) if S.size else 0.0
    a = float(coef[0])
    b = float(coef[1]) if eta is not None else 0.0
    ok = residual <= tol
    return EinsteinFit(einstein=ok and abs(b) <= tol, eta_einstein=ok and eta is not None,
                       a=a, b=b, residual=residual, tol=tol)
