"""Nonsingular parts of the matrix decompositions.

Rank-q SVD, spectral decomposition, QR with positive diagonal, rank-q
Cholesky, and the Moore-Penrose inverse, over beta <= 4.  Eigen and singular
value problems are solved on the real embedding, where each algebra
eigenvalue appears as a multiplet of beta equal real values; one real
eigenvector per multiplet folds back to an algebra eigenvector because the
eigenspace is a right module over the algebra.  QR and Cholesky run natively
over the algebra (modified Gram-Schmidt and row-by-row elimination), which
only needs associativity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import structure_tensor
from .errors import (
    DegenerateSpectrumError,
    InternalConsistencyError,
    NotPsdError,
    PivotRequiredError,
    RankError,
    ShapeMismatchError,
    UnsupportedAlgebraError,
)
from .linalg import Mat, conj_raw, ct_raw, is_hermitian, mul_raw, real_embed

DEFAULT_GAP_FACTOR = 1e-6
MULTIPLET_SPREAD_FACTOR = 1e-8


@dataclass(frozen=True)
class EigParts:
    """S = W1 diag(lam) W1* with W1*W1 = I and lam strictly decreasing positive."""

    w1: Mat
    lam: np.ndarray


@dataclass(frozen=True)
class SvdParts:
    """X = V1 diag(d) W1* with orthonormal columns and d strictly decreasing positive."""

    v1: Mat
    d: np.ndarray
    w1: Mat


@dataclass(frozen=True)
class QrParts:
    """X = H1 T with H1*H1 = I and the leading block of T upper triangular,
    diagonal real positive."""

    h1: Mat
    t: Mat


def _require_assoc(kind, what: str) -> None:
    if kind.beta > 4:
        raise UnsupportedAlgebraError(f"{what} is not defined for octonion matrices")


def _col_scalar_mul(col: np.ndarray, s: np.ndarray, beta: int) -> np.ndarray:
    """Right-multiply a column of scalars by one scalar: (col . s)_r = col_r s."""
    C = structure_tensor(beta)
    return np.einsum("np,q,pqr->nr", col, s, C)


def _col_inner(h: np.ndarray, x: np.ndarray, beta: int) -> np.ndarray:
    """h* x as an algebra scalar, columns given as (n, beta) arrays."""
    C = structure_tensor(beta)
    return np.einsum("np,nq,pqr->r", conj_raw(h), x, C)


def _phase_unit(col: np.ndarray) -> np.ndarray:
    """Unit scalar s such that (col . s) has its largest-magnitude entry real > 0."""
    norms = np.linalg.norm(col, axis=1)
    i = int(np.argmax(norms))  # ties resolve to the lowest row index
    a = col[i]
    return conj_raw(a.reshape(1, 1, -1)).reshape(-1) / norms[i]


def _fold_real_vector(u: np.ndarray, m: int, beta: int) -> np.ndarray:
    """Reinterpret a real embedding vector of length m*beta as (m, beta) coefficients."""
    return u.reshape(m, beta)


def _group_multiplets(values: np.ndarray, beta: int) -> np.ndarray:
    """Means of consecutive groups of beta values (values sorted descending)."""
    if values.size % beta:
        raise InternalConsistencyError("spectrum size is not a multiple of beta")
    return values.reshape(-1, beta).mean(axis=1)


def _check_multiplet_spread(values: np.ndarray, beta: int) -> None:
    groups = values.reshape(-1, beta)
    spread = float(values.max() - values.min()) if values.size else 0.0
    within = (groups.max(axis=1) - groups.min(axis=1)).max() if groups.size else 0.0
    if spread > 0 and within > MULTIPLET_SPREAD_FACTOR * spread + 1e-12:
        raise InternalConsistencyError(
            f"eigenvalue multiplets of size beta={beta} did not separate cleanly "
            f"(within-group spread {within:.3e} vs total {spread:.3e})"
        )


def _resolve_gap_tol(top: float, gap_tol: float | None) -> float:
    return DEFAULT_GAP_FACTOR * top if gap_tol is None else float(gap_tol)


def eig_hermitian(s: Mat, q: int, gap_tol: float | None = None) -> EigParts:
    """Nonsingular part of the spectral decomposition of a PSD Hermitian matrix.

    Returns the q strictly decreasing positive eigenvalues and phase-fixed
    orthonormal eigenvectors.  Raises a degenerate-spectrum error when two of
    the q eigenvalues (or the smallest one and zero) are closer than the gap
    tolerance, and a not-PSD error for negative eigenvalues beyond tolerance.
    """
    _require_assoc(s.kind, "eig_hermitian")
    if s.rows != s.cols:
        raise ShapeMismatchError(f"expected a square matrix, got {s.shape}")
    if not is_hermitian(s):
        raise NotPsdError("matrix is not Hermitian within tolerance")
    m, beta = s.rows, s.kind.beta
    if not 1 <= q <= m:
        raise RankError(f"q must lie in [1, {m}], got {q}")
    e = real_embed(s)
    w, vecs = np.linalg.eigh((e + e.T) / 2.0)
    w = w[::-1]
    vecs = vecs[:, ::-1]
    lam_groups = _group_multiplets(w, beta)
    top = float(abs(lam_groups[0])) if lam_groups.size else 0.0
    scale = max(top, float(np.abs(lam_groups).max()) if lam_groups.size else 0.0)
    if scale == 0.0:
        raise RankError("zero matrix has no nonsingular spectral part")
    if float(lam_groups.min()) < -1e-8 * scale:
        raise NotPsdError(f"negative eigenvalue {lam_groups.min():.3e} beyond tolerance")
    positive = int(np.sum(lam_groups > 1e-8 * scale))
    if positive != q:
        raise RankError(f"matrix has numerical rank {positive}, expected q={q}")
    gtol = _resolve_gap_tol(top, gap_tol)
    extended = np.concatenate([lam_groups[:q], [0.0]])
    gaps = extended[:-1] - extended[1:]
    if float(gaps.min()) < gtol:
        raise DegenerateSpectrumError(
            f"eigenvalue gap {gaps.min():.3e} below tolerance {gtol:.3e}"
        )
    _check_multiplet_spread(w, beta)
    cols = np.empty((m, q, beta))
    for i in range(q):
        u = vecs[:, i * beta]
        x = _fold_real_vector(u, m, beta)
        cols[:, i, :] = _col_scalar_mul(x, _phase_unit(x), beta)
    w1 = Mat(s.kind, cols)
    _assert_orthonormal(w1)
    return EigParts(w1=w1, lam=lam_groups[:q].copy())


def svd_rank_q(x: Mat, q: int, gap_tol: float | None = None) -> SvdParts:
    """Nonsingular part of the SVD: X = V1 diag(d) W1* with d strictly decreasing.

    W1 columns are phase-fixed; each V1 column is the paired image X w / d, so
    per-column phases are joint and the product reproduces X.
    """
    _require_assoc(x.kind, "svd_rank_q")
    n, m, beta = x.rows, x.cols, x.kind.beta
    if not 1 <= q <= min(n, m):
        raise RankError(f"q must lie in [1, {min(n, m)}], got {q}")
    e = real_embed(x)
    sv = np.linalg.svd(e, compute_uv=False)
    _, _, wt = np.linalg.svd(e)
    d_groups = _group_multiplets(sv[: min(n, m) * beta], beta)
    top = float(d_groups[0])
    if top == 0.0:
        raise RankError("zero matrix has no nonsingular SVD part")
    positive = int(np.sum(d_groups > 1e-8 * top))
    if positive != q:
        raise RankError(f"matrix has numerical rank {positive}, expected q={q}")
    gtol = _resolve_gap_tol(top, gap_tol)
    extended = np.concatenate([d_groups[:q], [0.0]])
    gaps = extended[:-1] - extended[1:]
    if float(gaps.min()) < gtol:
        raise DegenerateSpectrumError(
            f"singular value gap {gaps.min():.3e} below tolerance {gtol:.3e}"
        )
    _check_multiplet_spread(sv[: min(n, m) * beta], beta)
    d = d_groups[:q].copy()
    wcols = np.empty((m, q, beta))
    vcols = np.empty((n, q, beta))
    for i in range(q):
        u = wt[i * beta, :]
        wv = _fold_real_vector(u, m, beta)
        wv = _col_scalar_mul(wv, _phase_unit(wv), beta)
        wcols[:, i, :] = wv
        xv = mul_raw(x.data, wv[:, None, :], beta)[:, 0, :]
        vcols[:, i, :] = xv / d[i]
    v1 = Mat(x.kind, vcols)
    w1 = Mat(x.kind, wcols)
    _assert_orthonormal(v1)
    _assert_orthonormal(w1)
    _assert_residual(x, _assemble_svd(v1, d, w1), "SVD")
    return SvdParts(v1=v1, d=d, w1=w1)


def _assemble_svd(v1: Mat, d: np.ndarray, w1: Mat) -> Mat:
    scaled = v1.data * d[None, :, None]
    return Mat(v1.kind, mul_raw(scaled, ct_raw(w1.data), v1.kind.beta))


def _assert_orthonormal(u: Mat, tol: float = 1e-9) -> None:
    g = mul_raw(ct_raw(u.data), u.data, u.kind.beta)
    eye = np.zeros_like(g)
    idx = np.arange(g.shape[0])
    eye[idx, idx, 0] = 1.0
    err = float(np.abs(g - eye).max())
    if err > tol:
        raise InternalConsistencyError(f"columns lost orthonormality (error {err:.3e})")


def _assert_residual(x: Mat, y: Mat, label: str, tol: float = 1e-8) -> None:
    scale = max(1e-300, float(np.linalg.norm(x.data)))
    err = float(np.linalg.norm(x.data - y.data)) / scale
    if err > tol:
        raise InternalConsistencyError(f"{label} residual {err:.3e} exceeds {tol:.0e}")


def qr_positive(x: Mat, q: int) -> QrParts:
    """X = H1 T by modified Gram-Schmidt over the algebra, run twice.

    The leading q columns must be independent (pivot first otherwise); the
    leading q x q block of T comes out upper triangular with real positive
    diagonal, and the trailing block is H1* X[:, q:].
    """
    _require_assoc(x.kind, "qr_positive")
    n, m, beta = x.rows, x.cols, x.kind.beta
    if not 1 <= q <= min(n, m):
        raise RankError(f"q must lie in [1, {min(n, m)}], got {q}")
    scale = float(np.linalg.norm(x.data))
    h = np.empty((n, q, beta))
    t = np.zeros((q, m, beta))
    for k in range(q):
        v = x.data[:, k, :].copy()
        for _ in range(2):  # second sweep restores orthogonality lost to rounding
            for i in range(k):
                c = _col_inner(h[:, i, :], v, beta)
                t[i, k, :] += c
                v = v - _col_scalar_mul(h[:, i, :], c, beta)
        tkk = float(np.linalg.norm(v))
        if tkk <= 1e-10 * max(scale, 1e-300):
            raise PivotRequiredError(
                f"leading column {k} is numerically dependent on its predecessors"
            )
        t[k, k, 0] = tkk
        h[:, k, :] = v / tkk
    for j in range(q, m):
        for i in range(q):
            t[i, j, :] = _col_inner(h[:, i, :], x.data[:, j, :], beta)
    h1 = Mat(x.kind, h)
    tm = Mat(x.kind, t)
    _assert_orthonormal(h1)
    _assert_residual(
        Mat(x.kind, x.data[:, :, :]),
        Mat(x.kind, mul_raw(h1.data, tm.data, beta)),
        "QR",
    )
    return QrParts(h1=h1, t=tm)


def cholesky_rank_q(s: Mat, q: int) -> Mat:
    """Rank-q Cholesky: T (q x m) with S = T*T, T1 upper triangular, t_ii > 0.

    The leading q x q block of S must be positive definite (pivot first
    otherwise); T2 solves T1* T2 = S12 by forward substitution.
    """
    _require_assoc(s.kind, "cholesky_rank_q")
    if s.rows != s.cols:
        raise ShapeMismatchError(f"expected a square matrix, got {s.shape}")
    if not is_hermitian(s):
        raise NotPsdError("matrix is not Hermitian within tolerance")
    m, beta = s.rows, s.kind.beta
    if not 1 <= q <= m:
        raise RankError(f"q must lie in [1, {m}], got {q}")
    scale = float(np.abs(s.data).max())
    t = np.zeros((q, m, beta))
    for i in range(q):
        radicand = s.data[i, i, 0] - float(np.sum(t[:i, i, :] ** 2))
        if radicand <= 1e-12 * max(scale, 1e-300):
            raise PivotRequiredError(f"leading block is not positive definite at row {i}")
        tii = float(np.sqrt(radicand))
        t[i, i, 0] = tii
        for j in range(i + 1, m):
            acc = s.data[i, j, :].copy()
            for k in range(i):
                acc -= mul_raw(
                    conj_raw(t[k, i, :])[None, None, :], t[k, j, :][None, None, :], beta
                )[0, 0]
            t[i, j, :] = acc / tii
    tm = Mat(s.kind, t)
    back = Mat(s.kind, mul_raw(ct_raw(t), t, beta))
    residual = float(np.linalg.norm(back.data - s.data)) / max(
        1e-300, float(np.linalg.norm(s.data))
    )
    if residual > 1e-8:
        raise RankError(
            f"trailing block is not reproduced (residual {residual:.3e}); "
            f"matrix rank exceeds q={q}"
        )
    return tm


def pinv(x: Mat, gap_tol: float | None = None) -> Mat:
    """Moore-Penrose inverse W1 diag(1/d) V1* through the rank-q SVD."""
    _require_assoc(x.kind, "pinv")
    from .linalg import numerical_rank

    q = numerical_rank(x)
    if q == 0:
        return Mat.zeros(x.kind, x.cols, x.rows)
    parts = svd_rank_q(x, q, gap_tol=gap_tol)
    scaled = parts.w1.data / parts.d[None, :, None]
    return Mat(x.kind, mul_raw(scaled, ct_raw(parts.v1.data), x.kind.beta))
