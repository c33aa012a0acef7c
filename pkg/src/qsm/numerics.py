"""Dense linear-algebra primitives with deterministic conventions.

Everything downstream (block decompositions, protocol construction, bound
computations) relies on the conventions fixed here:

* the global numerical tolerance ``tau`` (default ``1e-9``, overridable via
  the ``QSM_TOL`` environment variable),
* eigen- and Schmidt decompositions sorted by descending value with a
  deterministic tie-break (vectors phase-normalized so their first
  significant component is real positive, ties ordered lexicographically),
* fidelity in the squared convention, ``F(rho, sigma) =
  (tr |sqrt(rho) sqrt(sigma)|)^2``, so pure-state fidelity is the squared
  overlap and the purified distance is ``sqrt(1 - F)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TOL_DEFAULT = 1e-9


def tolerance() -> float:
    """Global numerical tolerance tau; ``QSM_TOL`` overrides the default."""
    raw = os.environ.get("QSM_TOL")
    if raw is None:
        return TOL_DEFAULT
    try:
        value = float(raw)
    except ValueError as exc:
        raise ValidationError(f"QSM_TOL must parse as a float, got {raw!r}") from exc
    if not 0.0 < value < 1.0:
        raise ValidationError(f"QSM_TOL must lie in (0, 1), got {value}")
    return value


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return m.conj().T


def as_state_vector(v, dim: int | None = None) -> np.ndarray:
    """Validate and return a 1-D complex array of unit norm (within 1e-6)."""
    arr = np.asarray(v, dtype=complex).reshape(-1)
    if dim is not None and arr.size != dim:
        raise ValidationError(f"state vector has dimension {arr.size}, expected {dim}")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > 1e-6:
        raise ValidationError(f"state vector norm {norm} deviates from 1 by more than 1e-6")
    return arr / norm


def check_density_operator(rho: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Validate Hermiticity, positivity and unit trace of a density operator."""
    tol = tolerance() if tol is None else tol
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density operator must be square, got shape {rho.shape}")
    if np.abs(rho - dagger(rho)).max() > 10 * tol:
        raise ValidationError("density operator is not Hermitian within tolerance")
    tr = float(rho.trace().real)
    if abs(tr - 1.0) > 1e-6:
        raise ValidationError(f"density operator trace {tr} deviates from 1 by more than 1e-6")
    if np.linalg.eigvalsh((rho + dagger(rho)) / 2).min() < -10 * tol:
        raise ValidationError("density operator has a negative eigenvalue beyond tolerance")
    return (rho + dagger(rho)) / 2 / tr


def phase_normalize(v: np.ndarray, cutoff: float = 1e-7) -> np.ndarray:
    """Rotate a global phase so the first component with \\|v_i\\| > cutoff is real positive."""
    v = np.asarray(v, dtype=complex)
    for x in v.flat:
        if abs(x) > cutoff:
            return v * (x.conjugate() / abs(x))
    return v.copy()


def _lex_key(v: np.ndarray) -> tuple:
    # Descending entry-wise order so that, among degenerate candidates,
    # vectors supported on earlier basis levels sort first.
    rounded = np.round(v, 9)
    return tuple(-float(x) for pair in zip(rounded.real, rounded.imag) for x in pair)


def canonical_eigh(h: np.ndarray, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition with descending eigenvalues, deterministic.

    Each eigenvector is phase-normalized (first significant component real
    positive); eigenvalues equal within ``10 * tol`` are ordered
    lexicographically by the normalized eigenvector entries.
    """
    tol = tolerance() if tol is None else tol
    h = np.asarray(h, dtype=complex)
    vals, vecs = np.linalg.eigh((h + dagger(h)) / 2)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    cols = [phase_normalize(vecs[:, i]) for i in range(vecs.shape[1])]
    out_vals: list[float] = []
    out_cols: list[np.ndarray] = []
    i = 0
    n = len(cols)
    while i < n:
        j = i + 1
        while j < n and abs(vals[j] - vals[i]) <= 10 * tol:
            j += 1
        group = sorted(range(i, j), key=lambda k: _lex_key(cols[k]))
        out_vals.extend(vals[k] for k in group)
        out_cols.extend(cols[k] for k in group)
        i = j
    return np.array(out_vals, dtype=float), np.column_stack(out_cols)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Schmidt data of a bipartite vector: ``v = sum_l c_l (left_l (x) right_l)``.

    ``coeffs`` is descending and includes trailing (near-)zero values up to
    ``min(d_left, d_right)``; ``left``/``right`` hold the corresponding
    orthonormal vectors as columns.
    """

    coeffs: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def rank(self, tol: float | None = None) -> int:
        tol = tolerance() if tol is None else tol
        return int(np.sum(self.coeffs > tol))

    def reconstruct(self) -> np.ndarray:
        mat = self.left @ np.diag(self.coeffs) @ self.right.T
        return mat.reshape(-1)


def schmidt_decompose(v: np.ndarray, d_left: int, d_right: int | None = None) -> SchmidtDecomposition:
    """Schmidt decomposition of a vector across ``C^d_left (x) C^d_right``.

    Coefficients come out descending; left vectors are phase-normalized with
    the compensating phase absorbed into the right vectors, and coefficient
    ties are ordered lexicographically by the left vectors.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    if d_right is None:
        if v.size % d_left:
            raise ValidationError(f"vector of size {v.size} does not factor with d_left={d_left}")
        d_right = v.size // d_left
    if v.size != d_left * d_right:
        raise ValidationError(f"vector size {v.size} != {d_left} * {d_right}")
    mat = v.reshape(d_left, d_right)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    tol = tolerance()
    lefts = []
    rights = []
    for l in range(s.size):
        ul = u[:, l]
        phase = 1.0 + 0.0j
        for x in ul.flat:
            if abs(x) > 1e-7:
                phase = x.conjugate() / abs(x)
                break
        lefts.append(ul * phase)
        rights.append(vh[l, :] * phase.conjugate())
    order = list(range(s.size))
    i = 0
    ordered: list[int] = []
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(s[j] - s[i]) <= 10 * tol:
            j += 1
        ordered.extend(sorted(order[i:j], key=lambda k: _lex_key(lefts[k])))
        i = j
    coeffs = np.array([s[k] for k in ordered], dtype=float)
    left = np.column_stack([lefts[k] for k in ordered])
    right = np.column_stack([rights[k] for k in ordered])
    return SchmidtDecomposition(coeffs=coeffs, left=left, right=right)


def partial_trace(rho: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    """Partial trace of an operator on a tensor product, keeping ``keep`` factors in order."""
    dims = tuple(int(d) for d in dims)
    keep = tuple(int(k) for k in keep)
    n = len(dims)
    total = int(np.prod(dims))
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (total, total):
        raise ValidationError(f"operator shape {rho.shape} does not match dims {dims}")
    if any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise ValidationError(f"invalid keep indices {keep} for {n} factors")
    tensor = rho.reshape(dims + dims)
    row = list(range(n))
    col = list(range(n, 2 * n))
    for k in range(n):
        if k not in keep:
            col[k] = row[k]
    out_row = [row[k] for k in keep]
    out_col = [n + k for k in keep]
    result = np.einsum(tensor, row + col, out_row + out_col)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return result.reshape(d_keep, d_keep)


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((rho + dagger(rho)) / 2)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ dagger(vecs)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Fidelity in the squared convention; accepts vectors and/or density operators."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 1 and b.ndim == 1:
        val = abs(np.vdot(a, b)) ** 2
    elif a.ndim == 1:
        val = float(np.real(np.vdot(a, b @ a)))
    elif b.ndim == 1:
        val = float(np.real(np.vdot(b, a @ b)))
    else:
        root = _sqrtm_psd(a)
        inner = root @ b @ root
        vals = np.clip(np.linalg.eigvalsh((inner + dagger(inner)) / 2), 0.0, None)
        val = float(np.sum(np.sqrt(vals)) ** 2)
    return float(min(max(val, 0.0), 1.0 + 1e-12))


def purified_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``sqrt(1 - F)`` with the squared-convention fidelity ``F``."""
    return float(np.sqrt(max(0.0, 1.0 - fidelity(a, b))))


def majorization_check(x: np.ndarray, y: np.ndarray, tol: float | None = None) -> bool:
    """Whether ``x`` is majorized by ``y`` (prefix sums, zero-padded, tolerance ``tol``)."""
    tol = tolerance() if tol is None else tol
    x = np.sort(np.asarray(x, dtype=float))[::-1]
    y = np.sort(np.asarray(y, dtype=float))[::-1]
    n = max(x.size, y.size)
    x = np.pad(x, (0, n - x.size))
    y = np.pad(y, (0, n - y.size))
    cx = np.cumsum(x)
    cy = np.cumsum(y)
    if abs(cx[-1] - cy[-1]) > max(tol, 1e-9 * max(1.0, abs(cy[-1]))):
        return False
    return bool(np.all(cx <= cy + tol))


def is_isometry(m: np.ndarray, tol: float | None = None) -> bool:
    """Whether ``m^dag m = 1`` entrywise within ``tol``."""
    tol = tolerance() if tol is None else tol
    m = np.asarray(m, dtype=complex)
    gram = dagger(m) @ m
    return bool(np.abs(gram - np.eye(m.shape[1])).max() <= tol)


def orthonormal_complement(cols: np.ndarray, out_dim: int, count: int | None = None) -> np.ndarray:
    """Deterministic orthonormal basis of the complement of ``span(cols)`` in ``C^out_dim``.

    Candidates are the standard basis vectors in index order, projected against
    the accepted set twice for numerical stability; returns ``count`` columns
    (default: the full complement dimension).
    """
    cols = np.asarray(cols, dtype=complex).reshape(out_dim, -1)
    have = cols.shape[1]
    if count is None:
        count = out_dim - have
    if count < 0 or have + count > out_dim:
        raise ValidationError("requested complement larger than available dimension")
    basis = [cols[:, i] for i in range(have)]
    out: list[np.ndarray] = []
    for i in range(out_dim):
        if len(out) == count:
            break
        cand = np.zeros(out_dim, dtype=complex)
        cand[i] = 1.0
        for _ in range(2):
            for b in basis:
                cand = cand - b * np.vdot(b, cand)
        norm = np.linalg.norm(cand)
        if norm > 1e-7:
            cand = cand / norm
            basis.append(cand)
            out.append(cand)
    if len(out) < count:
        raise ValidationError("could not complete orthonormal basis (tolerance breakdown)")
    return np.column_stack(out) if out else np.zeros((out_dim, 0), dtype=complex)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian with phase-fixed diagonal."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    ph = np.diag(r).copy()
    ph = ph / np.abs(ph)
    return q * ph


def kron_all(mats) -> np.ndarray:
    """Kronecker product of an iterable of matrices, in order."""
    mats = list(mats)
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out
