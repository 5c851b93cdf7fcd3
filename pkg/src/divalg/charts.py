"""Coordinate charts for rank-q matrix manifolds, densities, and samplers.

A rank-q matrix is parameterized by the independent entries of its pivoted
leading blocks: X11, X12, X21 for rectangular matrices (X22 is determined as
X21 X11^{-1} X12) and S11, S12 for Hermitian PSD matrices (S22 = S12* S11^{-1}
S12).  The modules that integrate over these manifolds need three things
built here: completion/extraction between chart coordinates and full
matrices, the density of the chart's Lebesgue measure against the Hausdorff
surface measure (a Gram determinant of finite-difference tangent vectors in
the ambient inner product Re tr(A*B)), and samplers for the factorized
measures (spectrum box x uniform Stiefel frames).

Everything is written batch-first on raw coefficient arrays; the public
single-point API wraps batches of one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraKind, structure_tensor
from .errors import (
    ConditioningError,
    ConfigurationError,
    NotPsdError,
    RankError,
    RegistryError,
    ShapeMismatchError,
    SingularBlockError,
    UnsupportedAlgebraError,
)
from .linalg import Mat, conj_raw, ct_raw, embed_raw, fold_raw, mul_raw
from .measures import LOG2, LOGPI, stiefel_volume_log, tau

DEFAULT_FD_STEP = 1e-5
PIVOT_TOL = 1e-10
BLOCK_COND_TOL = 1e-10


def rect_coord_count(n: int, m: int, q: int, beta: int) -> int:
    return (n * q + m * q - q * q) * beta


def psd_coord_count(m: int, q: int, beta: int) -> int:
    # q real diagonals, full off-diagonals above them, and the S12 block
    return q + beta * q * (q - 1) // 2 + beta * q * (m - q)


def _check_perm(perm, size: int, label: str) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(size)):
        raise ShapeMismatchError(f"{label} must be a permutation of range({size}), got {perm}")
    return perm


@dataclass(frozen=True)
class RectChartPoint:
    """Chart coordinates of a rank-q n x m matrix: pivoted X11, X12, X21 blocks."""

    kind: AlgebraKind
    n: int
    m: int
    q: int
    row_pivot: tuple[int, ...]
    col_pivot: tuple[int, ...]
    x11: np.ndarray = field(repr=False)
    x12: np.ndarray = field(repr=False)
    x21: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.kind.beta > 4:
            raise UnsupportedAlgebraError("charts require an associative algebra")
        n, m, q, beta = self.n, self.m, self.q, self.kind.beta
        if not 1 <= q <= min(n, m):
            raise RankError(f"q must lie in [1, {min(n, m)}], got {q}")
        object.__setattr__(self, "row_pivot", _check_perm(self.row_pivot, n, "row_pivot"))
        object.__setattr__(self, "col_pivot", _check_perm(self.col_pivot, m, "col_pivot"))
        for name, shape in (
            ("x11", (q, q, beta)),
            ("x12", (q, m - q, beta)),
            ("x21", (n - q, q, beta)),
        ):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(shape)
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate(
            [self.x11.ravel(), self.x12.ravel(), self.x21.ravel()]
        )

    @staticmethod
    def from_coords(
        kind: AlgebraKind,
        n: int,
        m: int,
        q: int,
        row_pivot,
        col_pivot,
        coords: np.ndarray,
    ) -> "RectChartPoint":
        x11, x12, x21 = _rect_unpack(np.asarray(coords, dtype=float)[None, :], kind, n, m, q)
        return RectChartPoint(kind, n, m, q, tuple(row_pivot), tuple(col_pivot),
                              x11[0], x12[0], x21[0])


@dataclass(frozen=True)
class PsdChartPoint:
    """Chart coordinates of a rank-q Hermitian PSD matrix: pivoted S11, S12."""

    kind: AlgebraKind
    m: int
    q: int
    pivot: tuple[int, ...]
    s11: np.ndarray = field(repr=False)
    s12: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.kind.beta > 4:
            raise UnsupportedAlgebraError("charts require an associative algebra")
        m, q, beta = self.m, self.q, self.kind.beta
        if not 1 <= q <= m:
            raise RankError(f"q must lie in [1, {m}], got {q}")
        object.__setattr__(self, "pivot", _check_perm(self.pivot, m, "pivot"))
        s11 = np.asarray(self.s11, dtype=float).reshape(q, q, beta)
        herm_err = float(np.abs(s11 - ct_raw(s11)).max())
        if herm_err > 1e-10 * max(1.0, float(np.abs(s11).max())):
            raise NotPsdError(f"S11 block is not Hermitian (error {herm_err:.3e})")
        s11 = (s11 + ct_raw(s11)) / 2.0
        s11.setflags(write=False)
        object.__setattr__(self, "s11", s11)
        s12 = np.asarray(self.s12, dtype=float).reshape(q, m - q, beta).copy()
        s12.setflags(write=False)
        object.__setattr__(self, "s12", s12)

    @property
    def coords(self) -> np.ndarray:
        return _psd_pack(self.s11[None], self.s12[None], self.kind, self.m, self.q)[0]

    @staticmethod
    def from_coords(
        kind: AlgebraKind, m: int, q: int, pivot, coords: np.ndarray
    ) -> "PsdChartPoint":
        s11, s12 = _psd_unpack(np.asarray(coords, dtype=float)[None, :], kind, m, q)
        return PsdChartPoint(kind, m, q, tuple(pivot), s11[0], s12[0])


# ---------------------------------------------------------------------------
# batch packing / completion


def _rect_unpack(coords: np.ndarray, kind: AlgebraKind, n: int, m: int, q: int):
    beta = kind.beta
    k = rect_coord_count(n, m, q, beta)
    if coords.shape[1] != k:
        raise ShapeMismatchError(f"expected {k} coordinates, got {coords.shape[1]}")
    b = coords.shape[0]
    a = q * q * beta
    c = q * (m - q) * beta
    x11 = coords[:, :a].reshape(b, q, q, beta)
    x12 = coords[:, a : a + c].reshape(b, q, m - q, beta)
    x21 = coords[:, a + c :].reshape(b, n - q, q, beta)
    return x11, x12, x21


def _rect_pack(x11, x12, x21) -> np.ndarray:
    b = x11.shape[0]
    return np.concatenate(
        [x11.reshape(b, -1), x12.reshape(b, -1), x21.reshape(b, -1)], axis=1
    )


def _psd_unpack(coords: np.ndarray, kind: AlgebraKind, m: int, q: int):
    beta = kind.beta
    k = psd_coord_count(m, q, beta)
    if coords.shape[1] != k:
        raise ShapeMismatchError(f"expected {k} coordinates, got {coords.shape[1]}")
    b = coords.shape[0]
    s11 = np.zeros((b, q, q, beta))
    pos = 0
    for i in range(q):
        s11[:, i, i, 0] = coords[:, pos]
        pos += 1
    for i in range(q):
        for j in range(i + 1, q):
            v = coords[:, pos : pos + beta]
            s11[:, i, j, :] = v
            s11[:, j, i, 0] = v[:, 0]
            s11[:, j, i, 1:] = -v[:, 1:]
            pos += beta
    s12 = coords[:, pos:].reshape(b, q, m - q, beta)
    return s11, s12


def _psd_pack(s11, s12, kind: AlgebraKind, m: int, q: int) -> np.ndarray:
    beta = kind.beta
    b = s11.shape[0]
    parts = [s11[:, i, i, 0][:, None] for i in range(q)]
    for i in range(q):
        for j in range(i + 1, q):
            parts.append(s11[:, i, j, :])
    parts.append(s12.reshape(b, -1))
    return np.concatenate(parts, axis=1)


def _inv_hermitian_block(s11: np.ndarray, beta: int) -> np.ndarray:
    """Batched inverse of Hermitian PD blocks, with positivity check."""
    e = embed_raw(s11, beta)
    e = (e + np.swapaxes(e, -1, -2)) / 2.0
    eig = np.linalg.eigvalsh(e)
    top = float(np.abs(eig).max()) if eig.size else 0.0
    if float(eig.min()) <= 1e-12 * max(top, 1.0):
        raise NotPsdError(
            f"S11 block is not positive definite (min eigenvalue {eig.min():.3e})"
        )
    return fold_raw(np.linalg.inv(e), beta)


def _inv_general_block(x11: np.ndarray, beta: int) -> np.ndarray:
    e = embed_raw(x11, beta)
    sv = np.linalg.svd(e, compute_uv=False)
    top = np.maximum(sv[..., 0], 1e-300)
    if float((sv[..., -1] / top).min()) <= BLOCK_COND_TOL:
        raise SingularBlockError("X11 block is numerically singular")
    return fold_raw(np.linalg.inv(e), beta)


def complete_psd_batch(
    coords: np.ndarray, kind: AlgebraKind, m: int, q: int, pivot
) -> np.ndarray:
    """(B, k) chart coordinates -> (B, m, m, beta) full PSD matrices."""
    beta = kind.beta
    s11, s12 = _psd_unpack(coords, kind, m, q)
    b = coords.shape[0]
    if m == q:
        sp = s11
    else:
        s11_inv = _inv_hermitian_block(s11, beta)
        s21 = ct_raw(s12)
        s22 = mul_raw(mul_raw(s21, s11_inv, beta), s12, beta)
        s22 = (s22 + ct_raw(s22)) / 2.0
        sp = np.empty((b, m, m, beta))
        sp[:, :q, :q] = s11
        sp[:, :q, q:] = s12
        sp[:, q:, :q] = s21
        sp[:, q:, q:] = s22
    pv = np.asarray(pivot, dtype=int)
    out = np.empty_like(sp)
    out[:, pv[:, None], pv[None, :], :] = sp
    return out


def extract_psd_batch(data: np.ndarray, m: int, q: int, pivot, kind: AlgebraKind) -> np.ndarray:
    pv = np.asarray(pivot, dtype=int)
    sp = data[:, pv[:, None], pv[None, :], :]
    s11 = (sp[:, :q, :q] + ct_raw(sp[:, :q, :q])) / 2.0
    return _psd_pack(s11, sp[:, :q, q:], kind, m, q)


def complete_rect_batch(
    coords: np.ndarray, kind: AlgebraKind, n: int, m: int, q: int, row_pivot, col_pivot
) -> np.ndarray:
    """(B, k) chart coordinates -> (B, n, m, beta) full rank-q matrices."""
    beta = kind.beta
    x11, x12, x21 = _rect_unpack(coords, kind, n, m, q)
    b = coords.shape[0]
    xp = np.empty((b, n, m, beta))
    xp[:, :q, :q] = x11
    xp[:, :q, q:] = x12
    xp[:, q:, :q] = x21
    if n > q and m > q:
        x11_inv = _inv_general_block(x11, beta)
        xp[:, q:, q:] = mul_raw(mul_raw(x21, x11_inv, beta), x12, beta)
    rp = np.asarray(row_pivot, dtype=int)
    cp = np.asarray(col_pivot, dtype=int)
    out = np.empty_like(xp)
    out[:, rp[:, None], cp[None, :], :] = xp
    return out


def extract_rect_batch(
    data: np.ndarray, q: int, row_pivot, col_pivot
) -> np.ndarray:
    rp = np.asarray(row_pivot, dtype=int)
    cp = np.asarray(col_pivot, dtype=int)
    xp = data[:, rp[:, None], cp[None, :], :]
    return _rect_pack(xp[:, :q, :q], xp[:, :q, q:], xp[:, q:, :q])


# ---------------------------------------------------------------------------
# single-point API


def complete_rect(p: RectChartPoint) -> Mat:
    """Fill in X22 = X21 X11^{-1} X12 and undo the pivot permutations."""
    coords = p.coords[None, :]
    data = complete_rect_batch(coords, p.kind, p.n, p.m, p.q, p.row_pivot, p.col_pivot)
    return Mat(p.kind, data[0])


def complete_psd(p: PsdChartPoint) -> Mat:
    """Fill in S22 = S12* S11^{-1} S12 and undo the pivot permutation."""
    coords = p.coords[None, :]
    data = complete_psd_batch(coords, p.kind, p.m, p.q, p.pivot)
    return Mat(p.kind, data[0])


def extract_rect(a: Mat, q: int, row_pivot=None, col_pivot=None) -> RectChartPoint:
    if row_pivot is None or col_pivot is None:
        row_pivot, col_pivot = choose_pivot(a, q, chart="rect")
    p = RectChartPoint(
        a.kind,
        a.rows,
        a.cols,
        q,
        tuple(row_pivot),
        tuple(col_pivot),
        *(_rect_unpack(
            extract_rect_batch(a.data[None], q, row_pivot, col_pivot),
            a.kind, a.rows, a.cols, q,
        )[i][0] for i in range(3)),
    )
    back = complete_rect(p)
    err = float(np.linalg.norm(back.data - a.data))
    if err > 1e-9 * max(1.0, float(np.linalg.norm(a.data))):
        raise RankError(
            f"matrix is not rank {q} under this pivot (completion error {err:.3e})"
        )
    return p


def extract_psd(a: Mat, q: int, pivot=None) -> PsdChartPoint:
    if pivot is None:
        pivot = choose_pivot(a, q, chart="psd")
    coords = extract_psd_batch(a.data[None], a.rows, q, pivot, a.kind)
    p = PsdChartPoint.from_coords(a.kind, a.rows, q, tuple(pivot), coords[0])
    back = complete_psd(p)
    err = float(np.linalg.norm(back.data - a.data))
    if err > 1e-9 * max(1.0, float(np.linalg.norm(a.data))):
        raise RankError(
            f"matrix is not PSD rank {q} under this pivot (completion error {err:.3e})"
        )
    return p


def extract(a: Mat, q: int, pivot=None, chart: str | None = None):
    """Inverse of completion. chart='rect'|'psd'; defaults to 'psd' for Hermitian input."""
    from .linalg import is_hermitian

    if chart is None:
        chart = "psd" if is_hermitian(a) else "rect"
    if chart == "psd":
        return extract_psd(a, q, pivot)
    if chart == "rect":
        if pivot is None:
            return extract_rect(a, q)
        row_pivot, col_pivot = pivot
        return extract_rect(a, q, row_pivot, col_pivot)
    raise RegistryError(f"unknown chart {chart!r}; expected 'rect' or 'psd'")


def _entry_inv(p: np.ndarray) -> np.ndarray:
    n2 = float(np.dot(p, p))
    out = p.copy()
    out[1:] = -out[1:]
    return out / n2


def choose_pivot(a: Mat, q: int, chart: str = "rect"):
    """Greedy max-magnitude pivoting on successive Schur complements.

    chart='rect' returns (row_pivot, col_pivot) from complete pivoting;
    chart='psd' returns a single symmetric permutation from diagonal pivoting.
    Deterministic: ties break at the lowest flat index.
    """
    if a.kind.beta > 4:
        raise UnsupportedAlgebraError("choose_pivot requires an associative algebra")
    beta = a.kind.beta
    if chart == "rect":
        n, m = a.rows, a.cols
        if not 1 <= q <= min(n, m):
            raise RankError(f"q must lie in [1, {min(n, m)}], got {q}")
        work = a.data.copy()
        rows: list[int] = []
        cols: list[int] = []
        initial = None
        for _ in range(q):
            norms = np.linalg.norm(work, axis=2)
            norms[rows, :] = -1.0
            norms[:, cols] = -1.0
            i, j = np.unravel_index(int(np.argmax(norms)), norms.shape)
            best = norms[i, j]
            if initial is None:
                initial = best
            if best <= PIVOT_TOL * max(initial, 1e-300):
                raise RankError(f"matrix rank is below q={q} (pivot {best:.3e})")
            piv_inv = _entry_inv(work[i, j])
            colv = mul_raw(
                work[:, j].reshape(n, 1, beta), piv_inv.reshape(1, 1, beta), beta
            )
            work = work - mul_raw(colv, work[i].reshape(1, m, beta), beta)
            rows.append(int(i))
            cols.append(int(j))
        row_pivot = tuple(rows + [i for i in range(n) if i not in rows])
        col_pivot = tuple(cols + [j for j in range(m) if j not in cols])
        return row_pivot, col_pivot
    if chart == "psd":
        m = a.rows
        if a.rows != a.cols:
            raise ShapeMismatchError("psd pivoting requires a square matrix")
        if not 1 <= q <= m:
            raise RankError(f"q must lie in [1, {m}], got {q}")
        work = a.data.copy()
        sel: list[int] = []
        initial = None
        for _ in range(q):
            diag = work[np.arange(m), np.arange(m), 0].copy()
            diag[sel] = -np.inf
            i = int(np.argmax(diag))
            best = diag[i]
            if initial is None:
                initial = best
            if not best > PIVOT_TOL * max(initial, 1e-300):
                raise RankError(f"PSD rank is below q={q} (pivot {best:.3e})")
            piv_inv = _entry_inv(work[i, i])
            colv = mul_raw(
                work[:, i].reshape(m, 1, beta), piv_inv.reshape(1, 1, beta), beta
            )
            work = work - mul_raw(colv, work[i].reshape(1, m, beta), beta)
            sel.append(i)
        return tuple(sel + [i for i in range(m) if i not in sel])
    raise RegistryError(f"unknown chart {chart!r}; expected 'rect' or 'psd'")


# ---------------------------------------------------------------------------
# Hausdorff density


def _fd_gram_log(complete_fn, coords: np.ndarray, step: float) -> np.ndarray:
    """log sqrt(det G^T G) per batch row, G from central differences of complete_fn."""
    b, k = coords.shape
    h = np.maximum(step, step * np.abs(coords))
    columns = []
    for i in range(k):
        e = np.zeros_like(coords)
        e[:, i] = h[:, i]
        fp = complete_fn(coords + e).reshape(b, -1)
        fm = complete_fn(coords - e).reshape(b, -1)
        columns.append((fp - fm) / (2.0 * h[:, i])[:, None])
    g = np.stack(columns, axis=-1)
    gram = np.einsum("bai,baj->bij", g, g)
    sign, logdet = np.linalg.slogdet(gram)
    if np.any(sign <= 0.0):
        raise ConditioningError("chart Gram matrix is numerically singular")
    return 0.5 * logdet


def hausdorff_density_log_batch(
    space: str,
    coords: np.ndarray,
    kind: AlgebraKind,
    sizes: tuple[int, ...],
    pivots,
    step: float = DEFAULT_FD_STEP,
) -> np.ndarray:
    """Batched log Hausdorff density of a chart; space 'rect' ((n,m,q)) or 'psd' ((m,q))."""
    if space == "psd":
        m, q = sizes
        fn = lambda c: complete_psd_batch(c, kind, m, q, pivots)
    elif space == "rect":
        n, m, q = sizes
        row_pivot, col_pivot = pivots
        fn = lambda c: complete_rect_batch(c, kind, n, m, q, row_pivot, col_pivot)
    else:
        raise RegistryError(f"unknown chart space {space!r}")
    return _fd_gram_log(fn, coords, step)


def hausdorff_density(p: RectChartPoint | PsdChartPoint, step: float = DEFAULT_FD_STEP) -> float:
    """sqrt det(G^T G): density of the chart Lebesgue measure w.r.t. Hausdorff measure."""
    if isinstance(p, PsdChartPoint):
        out = hausdorff_density_log_batch(
            "psd", p.coords[None, :], p.kind, (p.m, p.q), p.pivot, step
        )
    else:
        out = hausdorff_density_log_batch(
            "rect",
            p.coords[None, :],
            p.kind,
            (p.n, p.m, p.q),
            (p.row_pivot, p.col_pivot),
            step,
        )
    return float(np.exp(out[0]))


# ---------------------------------------------------------------------------
# samplers


def _batch_col_inner(h: np.ndarray, v: np.ndarray, c_tensor: np.ndarray) -> np.ndarray:
    return np.einsum("bnp,bnq,pqr->br", conj_raw(h), v, c_tensor, optimize=True)


def _batch_col_scale(h: np.ndarray, c: np.ndarray, c_tensor: np.ndarray) -> np.ndarray:
    return np.einsum("bnp,bq,pqr->bnr", h, c, c_tensor, optimize=True)


def _mgs_batch(x: np.ndarray, beta: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched modified Gram-Schmidt (two passes); returns (frames, ok mask)."""
    c_tensor = structure_tensor(beta)
    b, n, q, _ = x.shape
    out = np.empty_like(x)
    ok = np.ones(b, dtype=bool)
    for k in range(q):
        v = x[:, :, k, :].copy()
        for _ in range(2):
            for i in range(k):
                coef = _batch_col_inner(out[:, :, i, :], v, c_tensor)
                v -= _batch_col_scale(out[:, :, i, :], coef, c_tensor)
        nrm = np.linalg.norm(v.reshape(b, -1), axis=1)
        ok &= nrm > 1e-12
        safe = np.where(nrm > 1e-12, nrm, 1.0)
        out[:, :, k, :] = v / safe[:, None, None]
    return out, ok


def sample_stiefel_batch(
    n: int, q: int, kind: AlgebraKind, rng: np.random.Generator, count: int
) -> np.ndarray:
    """(count, n, q, beta) frames drawn from the invariant measure on V_{q,n}."""
    if kind.beta > 4:
        raise UnsupportedAlgebraError("Stiefel sampling requires an associative algebra")
    if q > n:
        raise ShapeMismatchError(f"need q <= n, got q={q} n={n}")
    frames = np.empty((count, n, q, kind.beta))
    remaining = np.arange(count)
    for _ in range(100):
        draw = rng.standard_normal((remaining.size, n, q, kind.beta))
        got, ok = _mgs_batch(draw, kind.beta)
        frames[remaining[ok]] = got[ok]
        remaining = remaining[~ok]
        if remaining.size == 0:
            return frames
    raise ConfigurationError("Stiefel sampling kept drawing degenerate frames")


def sample_stiefel_uniform(
    n: int, q: int, kind: AlgebraKind, rng: np.random.Generator
) -> Mat:
    """One uniform frame; total mass downstream is exp(stiefel_volume_log(q, n, beta))."""
    return Mat(kind, sample_stiefel_batch(n, q, kind, rng, 1)[0])


def _sorted_spectrum(
    rng: np.random.Generator, lo: float, hi: float, q: int, count: int
) -> np.ndarray:
    x = rng.uniform(lo, hi, size=(count, q))
    x.sort(axis=1)
    return x[:, ::-1].copy()


def _min_gap(spec: np.ndarray) -> np.ndarray:
    if spec.shape[1] < 2:
        return np.full(spec.shape[0], np.inf)
    return (spec[:, :-1] - spec[:, 1:]).min(axis=1)


def sd_density_log_batch(lam: np.ndarray, beta: int, m: int) -> np.ndarray:
    """Vectorized spectral-decomposition density over (B, q) spectra."""
    q = lam.shape[1]
    logs = np.log(lam)
    out = -q * LOG2 + tau(beta, q) * LOGPI + beta * (m - q) * logs.sum(axis=1)
    iu, ju = np.triu_indices(q, k=1)
    if iu.size:
        out = out + beta * np.log(lam[:, iu] - lam[:, ju]).sum(axis=1)
    return out


def svd_density_log_batch(d: np.ndarray, beta: int, n: int, m: int) -> np.ndarray:
    """Vectorized SVD density over (B, q) spectra."""
    q = d.shape[1]
    logs = np.log(d)
    out = (
        -q * LOG2
        + tau(beta, q) * LOGPI
        + (beta * (n + m - 2 * q + 1) - 1) * logs.sum(axis=1)
    )
    iu, ju = np.triu_indices(q, k=1)
    if iu.size:
        out = out + beta * np.log(d[:, iu] ** 2 - d[:, ju] ** 2).sum(axis=1)
    return out


def assemble_sd_batch(w1: np.ndarray, lam: np.ndarray, beta: int) -> np.ndarray:
    scaled = w1 * lam[:, None, :, None]
    s = mul_raw(scaled, ct_raw(w1), beta)
    return (s + ct_raw(s)) / 2.0


def assemble_svd_batch(
    v1: np.ndarray, d: np.ndarray, w1: np.ndarray, beta: int
) -> np.ndarray:
    return mul_raw(v1 * d[:, None, :, None], ct_raw(w1), beta)


def sample_factorized_batch(
    space: str,
    kind: AlgebraKind,
    sizes: tuple[int, ...],
    box: tuple[float, float],
    gap: float,
    rng: np.random.Generator,
    count: int,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Batched draws from a factorized measure.

    Returns (matrices, log-weights, log-measure-constant).  Draws whose
    spectrum violates the gap get log-weight -inf but are still assembled, so
    weighted averages remain unbiased for the gap-restricted integral.
    """
    lo, hi = float(box[0]), float(box[1])
    if not 0.0 < lo < hi:
        raise ConfigurationError(f"eigenvalue box must satisfy 0 < lo < hi, got {box}")
    beta = kind.beta
    if space == "SD":
        m, q = sizes
        lam = _sorted_spectrum(rng, lo, hi, q, count)
        w1 = sample_stiefel_batch(m, q, kind, rng, count)
        data = assemble_sd_batch(w1, lam, beta)
        logw = sd_density_log_batch(lam, beta, m)
        logw = np.where(_min_gap(lam) >= gap, logw, -np.inf)
        const = (
            q * math.log(hi - lo)
            - math.lgamma(q + 1)
            + stiefel_volume_log(q, m, beta)
        )
        return data, logw, const
    if space == "SVD":
        n, m, q = sizes
        d = _sorted_spectrum(rng, lo, hi, q, count)
        v1 = sample_stiefel_batch(n, q, kind, rng, count)
        w1 = sample_stiefel_batch(m, q, kind, rng, count)
        data = assemble_svd_batch(v1, d, w1, beta)
        logw = svd_density_log_batch(d, beta, n, m)
        logw = np.where(_min_gap(d) >= gap, logw, -np.inf)
        const = (
            q * math.log(hi - lo)
            - math.lgamma(q + 1)
            + stiefel_volume_log(q, n, beta)
            + stiefel_volume_log(q, m, beta)
        )
        return data, logw, const
    raise RegistryError(f"unknown factorized space {space!r}; expected 'SD' or 'SVD'")


def sample_factorized(
    space: str,
    kind: AlgebraKind,
    sizes: tuple[int, ...],
    box: tuple[float, float],
    gap: float,
    rng: np.random.Generator,
) -> tuple[Mat, float, float]:
    """One draw: (matrix, log-weight, log-measure-constant)."""
    data, logw, const = sample_factorized_batch(space, kind, sizes, box, gap, rng, 1)
    return Mat(kind, data[0]), float(logw[0]), const


def draw_factorized_valid(
    space: str,
    kind: AlgebraKind,
    sizes: tuple[int, ...],
    box: tuple[float, float],
    gap: float,
    rng: np.random.Generator,
) -> tuple[Mat, float, float]:
    """A draw with positive weight; errors if the gap rejects over ~99% of draws."""
    data, logw, const = sample_factorized_batch(space, kind, sizes, box, gap, rng, 256)
    valid = np.nonzero(np.isfinite(logw))[0]
    if valid.size == 0:
        raise ConfigurationError(
            f"gap {gap} rejects essentially every draw from box {box}"
        )
    i = int(valid[0])
    return Mat(kind, data[i]), float(logw[i]), const
