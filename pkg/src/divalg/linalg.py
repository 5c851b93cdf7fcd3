"""Dense matrices over a division algebra.

A matrix is stored as an (n, m, beta) float64 array of coefficients plus an
algebra tag.  For beta <= 4 the left-regular representation turns each entry
into a beta x beta real block; determinants, ranks and inverses are computed
on that embedding and folded back.  Octonion matrices support construction,
addition, conjugation and entrywise products only: non-associativity breaks
the embedding.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import AlgebraKind, Scalar, structure_tensor
from .errors import (
    AlgebraMismatchError,
    InternalConsistencyError,
    ShapeMismatchError,
    SingularBlockError,
    UnsupportedAlgebraError,
)

# Raw kernels operate on plain coefficient arrays with arbitrary leading batch
# axes; the Mat wrappers below delegate to them.


def mul_raw(a: np.ndarray, b: np.ndarray, beta: int) -> np.ndarray:
    C = structure_tensor(beta)
    return np.einsum("...ikp,...kjq,pqr->...ijr", a, b, C, optimize=True)


def conj_raw(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def ct_raw(a: np.ndarray) -> np.ndarray:
    return conj_raw(np.swapaxes(a, -3, -2))


def embed_raw(a: np.ndarray, beta: int) -> np.ndarray:
    """Left-regular representation, (..., n, m, beta) -> (..., n*beta, m*beta)."""
    C = structure_tensor(beta)
    n, m = a.shape[-3], a.shape[-2]
    blocks = np.einsum("...ijp,pqr->...irjq", a, C, optimize=True)
    return blocks.reshape(a.shape[:-3] + (n * beta, m * beta))


def fold_raw(e: np.ndarray, beta: int) -> np.ndarray:
    """Inverse of embed_raw; reads the first column of each beta x beta block."""
    n, m = e.shape[-2] // beta, e.shape[-1] // beta
    blocks = e.reshape(e.shape[:-2] + (n, beta, m, beta))
    return np.moveaxis(blocks[..., :, :, :, 0], -2, -1)


@dataclass(frozen=True)
class Mat:
    """n x m matrix over one of the division algebras (coefficients last axis)."""

    kind: AlgebraKind
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != self.kind.beta:
            raise ShapeMismatchError(
                f"expected (rows, cols, {self.kind.beta}) coefficient array, got {arr.shape}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatchError("matrix dimensions must be positive")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix coefficients must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def H(self) -> "Mat":
        return conj_transpose(self)

    def entry(self, i: int, j: int) -> Scalar:
        return Scalar(self.kind, self.data[i, j])

    @staticmethod
    def zeros(kind: AlgebraKind, n: int, m: int) -> "Mat":
        return Mat(kind, np.zeros((n, m, kind.beta)))

    @staticmethod
    def eye(kind: AlgebraKind, n: int) -> "Mat":
        d = np.zeros((n, n, kind.beta))
        d[np.arange(n), np.arange(n), 0] = 1.0
        return Mat(kind, d)

    @staticmethod
    def from_real(kind: AlgebraKind, array: np.ndarray) -> "Mat":
        arr = np.asarray(array, dtype=float)
        if arr.ndim != 2:
            raise ShapeMismatchError("expected a 2-d real array")
        d = np.zeros(arr.shape + (kind.beta,))
        d[..., 0] = arr
        return Mat(kind, d)

    def __add__(self, other: "Mat") -> "Mat":
        _check(self, other, same_shape=True)
        return Mat(self.kind, self.data + other.data)

    def __sub__(self, other: "Mat") -> "Mat":
        _check(self, other, same_shape=True)
        return Mat(self.kind, self.data - other.data)

    def __neg__(self) -> "Mat":
        return Mat(self.kind, -self.data)

    def __mul__(self, c: float) -> "Mat":
        return Mat(self.kind, self.data * float(c))

    __rmul__ = __mul__

    def __matmul__(self, other: "Mat") -> "Mat":
        return matmul(self, other)


def _check(a: Mat, b: Mat, same_shape: bool = False) -> None:
    if a.kind != b.kind:
        raise AlgebraMismatchError(f"algebra tags differ: {a.kind.name} vs {b.kind.name}")
    if same_shape and a.shape != b.shape:
        raise ShapeMismatchError(f"shapes differ: {a.shape} vs {b.shape}")


def matmul(a: Mat, b: Mat) -> Mat:
    """Entrywise sum of scalar products, left-to-right order within each term."""
    _check(a, b)
    if a.cols != b.rows:
        raise ShapeMismatchError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return Mat(a.kind, mul_raw(a.data, b.data, a.kind.beta))


def conj_transpose(a: Mat) -> Mat:
    return Mat(a.kind, ct_raw(a.data))


def _require_embeddable(a: Mat, op: str) -> None:
    if a.kind.beta > 4:
        raise UnsupportedAlgebraError(f"{op} requires an associative algebra (beta <= 4)")


def real_embed(a: Mat) -> np.ndarray:
    """beta*n x beta*m real matrix of left multiplication by a (beta <= 4)."""
    _require_embeddable(a, "real_embed")
    return embed_raw(a.data, a.kind.beta)


def fold_embedding(e: np.ndarray, kind: AlgebraKind) -> Mat:
    """Reassemble a Mat from a real embedding image (does not validate structure)."""
    if kind.beta > 4:
        raise UnsupportedAlgebraError("fold_embedding requires beta <= 4")
    e = np.asarray(e, dtype=float)
    if e.ndim != 2 or e.shape[0] % kind.beta or e.shape[1] % kind.beta:
        raise ShapeMismatchError(f"embedding shape {e.shape} not divisible by beta={kind.beta}")
    return Mat(kind, fold_raw(e, kind.beta))


def sdet(a: Mat) -> float:
    """|det real_embed(A)|^(1/beta): abs det, complex modulus, or Study determinant."""
    lg = sdet_log(a)
    return 0.0 if lg == -np.inf else float(np.exp(lg))


def sdet_log(a: Mat) -> float:
    _require_embeddable(a, "sdet")
    if a.rows != a.cols:
        raise ShapeMismatchError(f"sdet requires a square matrix, got {a.shape}")
    sign, logabs = np.linalg.slogdet(real_embed(a))
    if sign == 0.0:
        return -np.inf
    return float(logabs) / a.kind.beta


def numerical_rank(a: Mat, tol: float = 1e-10) -> int:
    """Count of singular values above tol * largest, in algebra units."""
    _require_embeddable(a, "numerical_rank")
    sv = np.linalg.svd(real_embed(a), compute_uv=False)
    top = sv[0] if sv.size else 0.0
    if top <= 0.0:
        return 0
    count = int(np.sum(sv > tol * top))
    if count % a.kind.beta:
        raise InternalConsistencyError(
            f"embedding rank {count} is not a multiple of beta={a.kind.beta}; "
            "rank threshold falls inside a singular-value multiplet"
        )
    return count // a.kind.beta


def mat_inv(a: Mat) -> Mat:
    """Two-sided inverse computed on the real embedding."""
    _require_embeddable(a, "mat_inv")
    if a.rows != a.cols:
        raise ShapeMismatchError(f"mat_inv requires a square matrix, got {a.shape}")
    try:
        e = np.linalg.inv(real_embed(a))
    except np.linalg.LinAlgError as exc:
        raise SingularBlockError(f"matrix is singular: {exc}") from exc
    return Mat(a.kind, fold_raw(e, a.kind.beta))


def inner_re(a: Mat, b: Mat) -> float:
    """Re tr(A* B): the flat Euclidean inner product on coefficient arrays."""
    _check(a, b, same_shape=True)
    return float(np.sum(a.data * b.data))


def frobenius_norm(a: Mat) -> float:
    return float(np.linalg.norm(a.data))


def is_hermitian(a: Mat, tol: float = 1e-10) -> bool:
    if a.rows != a.cols:
        return False
    diff = np.linalg.norm(a.data - ct_raw(a.data))
    return diff <= tol * max(1.0, float(np.linalg.norm(a.data)))


def save_matrix(a: Mat, path: str | Path) -> None:
    """Write the matrix as JSON: beta, rows, cols, row-major coefficient lists."""
    doc = {
        "beta": a.kind.beta,
        "rows": a.rows,
        "cols": a.cols,
        "entries": a.data.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_matrix(path: str | Path) -> Mat:
    doc = json.loads(Path(path).read_text())
    kind = AlgebraKind.from_beta(int(doc["beta"]))
    arr = np.asarray(doc["entries"], dtype=float)
    if arr.shape != (int(doc["rows"]), int(doc["cols"]), kind.beta):
        raise ShapeMismatchError(
            f"entries shape {arr.shape} does not match rows/cols/beta in header"
        )
    return Mat(kind, arr)
