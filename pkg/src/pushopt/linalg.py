"""Weighted norms, block operators, and power-iteration spectral norms.

Stacked states live in R^{n*d} and are represented as ndarrays of shape
(n, d) whose row j is the block of agent j.  Block operators are ndarrays
of shape (n, n, d, d); block (i, j) acts on block j of a stacked state.

All induced norms are computed through one kernel: similarity-transform the
matrix by D = diag(sqrt(pi)) (Kronecker-extended for block operators) and
take the ordinary spectral norm of the result, so the pi-weighted operator
norm, the mixing norm and the operator Lipschitz constants all share a
single numeric path.
"""

import numpy as np

from .errors import DimensionMismatchError, NoConvergenceError

_STOP_FLOOR = 1e-300  # avoids a zero threshold when the true norm is zero


def pi_norm(w, pi):
    """Weighted norm (sum_j ||w_j||^2 / pi_j)^(1/2) of a stacked state.

    Accepts an (n, d) stacked state or a plain length-n vector (d = 1).
    Equals the Euclidean norm of the state rescaled blockwise by
    1/sqrt(pi_j).
    """
    w = np.asarray(w, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.ndim != 2 or w.shape[0] != pi.shape[0]:
        raise DimensionMismatchError(
            f"stacked state with {w.shape} blocks vs {pi.shape[0]} weights"
        )
    return float(np.sqrt(((w * w).sum(axis=1) / pi).sum()))


def apply_block_operator(M, w):
    """Apply an (n, n, d, d) block operator: result_i = sum_j M[i, j] w_j."""
    M = np.asarray(M, dtype=float)
    w = np.asarray(w, dtype=float)
    if M.ndim != 4 or w.ndim != 2:
        raise DimensionMismatchError(f"expected (n,n,d,d) and (n,d), got {M.shape}, {w.shape}")
    n, n2, d, d2 = M.shape
    if n != n2 or d != d2 or w.shape != (n, d):
        raise DimensionMismatchError(f"operator {M.shape} incompatible with state {w.shape}")
    return np.einsum("ijab,jb->ia", M, w)


def kron_block(A, d):
    """Lift an n x n matrix to the block operator with blocks A[i, j] * I_d."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return A[:, :, None, None] * np.eye(d)[None, None, :, :]


def flatten_block_operator(M):
    """Reinterpret an (n, n, d, d) block operator as a dense nd x nd matrix."""
    n, _, d, _ = M.shape
    return np.ascontiguousarray(M.transpose(0, 2, 1, 3)).reshape(n * d, n * d)


def spectral_norm(M, tol=1e-10, max_iter=20000, restarts=3, block=12):
    """Largest singular value by block power iteration on M^T M.

    Iterates a small deterministic subspace (size ``block``) under M^T M
    with QR re-orthonormalization, so tight clusters of top singular
    values, which stall single-vector iteration, converge at the rate of
    the cluster-to-remainder gap instead.  Runs up to ``restarts``
    deterministic starts (ones plus Gaussian columns from generators
    seeded with the restart index) and returns the square root of the
    largest Ritz value found; two consecutive starts agreeing within
    ``tol`` end the search early.

    Raises
    ------
    NoConvergenceError
        If any start exhausts ``max_iter`` iterations with the top Ritz
        residual above ``tol`` relative to the estimate.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise DimensionMismatchError("matrix entries must be finite")
    if M.size == 0:
        return 0.0
    B = M.T @ M
    best = 0.0
    prev = None
    for r in range(max(1, restarts)):
        lam = _top_eig_psd(B, tol, max_iter, start_index=r, block=block)
        best = max(best, lam)
        if prev is not None and abs(lam - prev) <= tol * max(best, _STOP_FLOOR):
            break
        prev = lam
    return float(np.sqrt(best))


def _start_block(size, index, block):
    if index == 0:
        cols = [np.ones((size, 1))]
        if block > 1:
            cols.append(np.random.default_rng(1).standard_normal((size, block - 1)))
        V = np.hstack(cols)
    else:
        V = np.random.default_rng(1000 * index).standard_normal((size, block))
    q, _ = np.linalg.qr(V)
    return q


def _top_eig_psd(B, tol, max_iter, start_index=0, scale=None, block=12):
    """Largest eigenvalue of a symmetric psd matrix by block power iteration.

    ``scale`` sets the absolute stopping scale; by default the running
    Ritz value itself (relative accuracy).
    """
    size = B.shape[0]
    # keep the subspace strictly smaller than the space so this stays a
    # genuine iteration rather than a one-shot dense diagonalization
    b = max(1, min(block, size - 1)) if size > 1 else 1
    V = _start_block(size, start_index, b)
    for _ in range(max_iter):
        U = B @ V
        if not np.any(U):
            return 0.0  # the subspace sits in the kernel; the norm along it is zero
        G = V.T @ U
        ritz, vecs = np.linalg.eigh(0.5 * (G + G.T))
        lam = float(ritz[-1])
        top = V @ vecs[:, -1]
        resid = np.linalg.norm(U @ vecs[:, -1] - lam * top)
        if resid <= tol * max(lam, scale if scale is not None else 0.0, _STOP_FLOOR):
            return max(lam, 0.0)
        V, _ = np.linalg.qr(U)
    raise NoConvergenceError(
        f"eigen-residual above tolerance {tol} after {max_iter} power iterations"
    )


def symmetric_extremes(H, tol=1e-10, max_iter=20000, restarts=3):
    """(largest, smallest) eigenvalue of a symmetric psd matrix.

    The largest eigenvalue comes from power iteration on H itself; the
    smallest from power iteration on ``lam_max I - H`` (a shift that keeps
    the iteration matrix psd), stopping at ``tol`` relative to lam_max.
    """
    H = np.asarray(H, dtype=float)
    lam_max = 0.0
    prev = None
    for r in range(max(1, restarts)):
        lam = _top_eig_psd(H, tol, max_iter, start_index=r)
        lam_max = max(lam_max, lam)
        if prev is not None and abs(lam - prev) <= tol * max(lam_max, _STOP_FLOOR):
            break
        prev = lam
    if lam_max == 0.0:
        return 0.0, 0.0
    S = lam_max * np.eye(H.shape[0]) - H
    shifted = 0.0
    prev = None
    for r in range(max(1, restarts)):
        lam = _top_eig_psd(S, tol, max_iter, start_index=r, scale=lam_max)
        shifted = max(shifted, lam)
        if prev is not None and abs(lam - prev) <= tol * lam_max:
            break
        prev = lam
    lam_min = lam_max - shifted
    return float(lam_max), float(max(lam_min, 0.0))


def induced_pi_norm(M, pi, tol=1e-10):
    """Operator norm in the pi-weighted metric.

    For an n x n matrix this is the spectral norm of D^-1 M D with
    D = diag(sqrt(pi)); for an (n, n, d, d) block operator, D is extended
    blockwise (each block (i, j) is scaled by sqrt(pi_j / pi_i)).
    """
    M = np.asarray(M, dtype=float)
    pi = np.asarray(pi, dtype=float)
    s = np.sqrt(pi)
    if M.ndim == 2:
        if M.shape[0] != M.shape[1] or M.shape[0] != pi.shape[0]:
            raise DimensionMismatchError(f"matrix {M.shape} vs {pi.shape[0]} weights")
        T = M * (s[None, :] / s[:, None])
    elif M.ndim == 4:
        if M.shape[0] != pi.shape[0]:
            raise DimensionMismatchError(f"operator {M.shape} vs {pi.shape[0]} weights")
        T = flatten_block_operator(M * (s[None, :, None, None] / s[:, None, None, None]))
    else:
        raise DimensionMismatchError(f"expected a matrix or block operator, got ndim={M.ndim}")
    return spectral_norm(T, tol=tol)
