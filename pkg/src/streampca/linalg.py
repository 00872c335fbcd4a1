"""Dense small-matrix kernels used throughout the package.

Everything here is sized for the regime this library targets (dimensions in
the tens, not thousands): column orthonormalization, a cyclic-Jacobi
symmetric eigensolver, singular values derived from it, and a fixed-point
series solver for the discrete Lyapunov equation that produces the
stationary covariance of a linear autoregression.

All functions are pure and operate on float64 numpy arrays; none of them
mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "orthonormalize",
    "sym_eig",
    "singular_values",
    "lyapunov_stationary",
    "SpectralTruth",
]

# Rank tolerance for orthonormalize: smallest/largest singular value ratio.
_RANK_TOL = 1e-12
# Jacobi sweep convergence: off-diagonal Frobenius norm relative to ||A||_F.
_JACOBI_TOL = 1e-13
_JACOBI_MAX_SWEEPS = 100


def _as_matrix(x, name: str) -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def orthonormalize(u, method: str = "householder") -> np.ndarray:
    """Return an m x r matrix with orthonormal columns spanning col(u).

    The default path is Householder QR with the sign convention that the
    triangular factor has a positive diagonal, which makes the result
    deterministic and leaves an already-orthonormal input unchanged (up to
    roundoff). ``method="mgs"`` switches to modified Gram-Schmidt, kept as
    an experimental alternative; it shares the same sign convention.

    Parameters
    ----------
    u : array_like, shape (m, r)
        Full column rank, m >= r >= 1.
    method : {"householder", "mgs"}

    Raises
    ------
    ValueError
        If u is rank deficient; the message names the offending column.
    """
    a = _as_matrix(u, "u")
    m, r = a.shape
    if not 1 <= r <= m:
        raise ValueError(f"u must have 1 <= cols <= rows, got {m}x{r}")

    if method == "householder":
        q, rmat = np.linalg.qr(a, mode="reduced")
        diag = np.diagonal(rmat).copy()
        scale = float(np.max(np.abs(diag))) if r > 0 else 0.0
        bad = np.nonzero(np.abs(diag) <= _RANK_TOL * scale)[0]
        if scale == 0.0 or bad.size:
            col = int(bad[0]) if bad.size else 0
            raise ValueError(f"u is rank deficient at column {col}")
        signs = np.where(diag < 0.0, -1.0, 1.0)
        return q * signs
    if method == "mgs":
        q = a.copy()
        for j in range(r):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
            nrm = float(np.linalg.norm(q[:, j]))
            if nrm <= _RANK_TOL * max(1.0, float(np.linalg.norm(a[:, j]))):
                raise ValueError(f"u is rank deficient at column {j}")
            q[:, j] /= nrm
        return q
    raise ValueError(f"unknown orthonormalization method: {method!r}")


def _jacobi_rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    """Zero out a[p, q] with a Givens rotation; accumulate it into v."""
    apq = a[p, q]
    if apq == 0.0:
        return
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    # Smaller-magnitude root of t^2 + 2*theta*t - 1 = 0 for stability.
    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta != 0.0 else 1.0
    c = 1.0 / np.hypot(t, 1.0)
    s = t * c

    rp = a[p, :].copy()
    rq = a[q, :].copy()
    a[p, :] = c * rp - s * rq
    a[q, :] = s * rp + c * rq
    cp = a[:, p].copy()
    cq = a[:, q].copy()
    a[:, p] = c * cp - s * cq
    a[:, q] = s * cp + c * cq
    a[p, q] = 0.0
    a[q, p] = 0.0

    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq


def sym_eig(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Returns ``(eigvals, eigvecs)`` with eigenvalues sorted non-increasing
    and eigenvectors as the corresponding columns, so that
    ``s ~= eigvecs @ diag(eigvals) @ eigvecs.T``.

    Sweeps stop when the off-diagonal Frobenius norm drops below
    1e-13 * ||s||_F, or after 100 sweeps.
    """
    a = _as_matrix(s, "s")
    m, n = a.shape
    if m != n:
        raise ValueError(f"s must be square, got {m}x{n}")
    fro = float(np.linalg.norm(a))
    if fro > 0.0 and float(np.linalg.norm(a - a.T)) > 1e-10 * fro:
        raise ValueError("s is not symmetric (relative asymmetry above 1e-10)")

    a = (a + a.T) / 2.0
    v = np.eye(m)
    if fro > 0.0:
        for _ in range(_JACOBI_MAX_SWEEPS):
            off = np.linalg.norm(a - np.diag(np.diagonal(a)))
            if off < _JACOBI_TOL * fro:
                break
            for p in range(m - 1):
                for q in range(p + 1, m):
                    if abs(a[p, q]) > _JACOBI_TOL * fro / m:
                        _jacobi_rotate(a, v, p, q)

    eigvals = np.diagonal(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], v[:, order]


def singular_values(a) -> np.ndarray:
    """Singular values of a, non-increasing and clamped to be non-negative.

    Computed as the square roots of the eigenvalues of the smaller Gram
    matrix (A^T A or A A^T), via :func:`sym_eig`.
    """
    mat = _as_matrix(a, "a")
    r1, r2 = mat.shape
    gram = mat.T @ mat if r2 <= r1 else mat @ mat.T
    gram = (gram + gram.T) / 2.0
    eigvals, _ = sym_eig(gram)
    return np.sqrt(np.clip(eigvals, 0.0, None))


def _is_contractive(a: np.ndarray) -> bool:
    """Check spectral radius < 1 through decay of ||a^k||_F over k = 1..64."""
    norm0 = float(np.linalg.norm(a))
    if norm0 == 0.0:
        return True
    power = a.copy()
    for _ in range(63):
        power = power @ a
        norm = float(np.linalg.norm(power))
        if norm < 1e-8:
            return True
        if not np.isfinite(norm) or norm > 1e12:
            return False
    norm64 = float(np.linalg.norm(power))
    return norm64 < norm0


def lyapunov_stationary(a, s) -> np.ndarray:
    """Solve Sigma = A Sigma A^T + S for the stationary covariance Sigma.

    Accumulates the fixed-point series Sigma = sum_i A^i S (A^T)^i, valid
    whenever the spectral radius of A is below 1; iteration stops once the
    increment's Frobenius norm falls under 1e-14 * ||S||_F, which leaves a
    residual well inside 1e-10 * ||S||_F.
    """
    amat = _as_matrix(a, "a")
    smat = _as_matrix(s, "s")
    m, n = amat.shape
    if m != n:
        raise ValueError(f"a must be square, got {m}x{n}")
    if smat.shape != (m, m):
        raise ValueError(f"s must match a's shape {m}x{m}, got {smat.shape}")
    s_fro = float(np.linalg.norm(smat))
    if s_fro > 0.0 and float(np.linalg.norm(smat - smat.T)) > 1e-10 * s_fro:
        raise ValueError("s is not symmetric")
    if not _is_contractive(amat):
        raise ValueError("a is not contractive: ||a^k||_F does not decay over k=1..64")
    if s_fro == 0.0:
        return np.zeros((m, m))

    sigma = smat.copy()
    term = smat.copy()
    for _ in range(200_000):
        term = amat @ term @ amat.T
        sigma += term
        if float(np.linalg.norm(term)) < 1e-14 * s_fro:
            break
    else:
        raise ValueError("Lyapunov series did not converge; a is too close to unit spectral radius")
    return (sigma + sigma.T) / 2.0


@dataclass(frozen=True)
class SpectralTruth:
    """A covariance matrix together with its full eigendecomposition.

    ``sigma = eigvecs @ diag(eigvals) @ eigvecs.T`` with eigenvalues sorted
    non-increasing. Serves as ground truth for every alignment diagnostic.
    """

    sigma: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    def __post_init__(self):
        sig = _as_matrix(self.sigma, "sigma")
        vals = np.asarray(self.eigvals, dtype=np.float64)
        vecs = _as_matrix(self.eigvecs, "eigvecs")
        m = sig.shape[0]
        if sig.shape != (m, m) or vecs.shape != (m, m) or vals.shape != (m,):
            raise ValueError("inconsistent shapes in SpectralTruth")
        if np.any(np.diff(vals) > 1e-12):
            raise ValueError("eigvals must be sorted non-increasing")
        sig_fro = float(np.linalg.norm(sig))
        recon = vecs @ np.diag(vals) @ vecs.T
        if float(np.linalg.norm(recon - sig)) > 1e-8 * max(sig_fro, 1e-30):
            raise ValueError("eigendecomposition does not reconstruct sigma")
        if float(np.linalg.norm(vecs.T @ vecs - np.eye(m))) > 1e-10:
            raise ValueError("eigvecs are not orthogonal")
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "eigvals", vals)
        object.__setattr__(self, "eigvecs", vecs)

    @classmethod
    def from_sigma(cls, sigma) -> "SpectralTruth":
        sig = _as_matrix(sigma, "sigma")
        vals, vecs = sym_eig(sig)
        return cls(sigma=sig, eigvals=vals, eigvecs=vecs)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def eigengap(self, r: int) -> float:
        """lambda_r - lambda_{r+1} (1-based r)."""
        if not 1 <= r < self.dim:
            raise ValueError(f"r must be in [1, {self.dim - 1}], got {r}")
        return float(self.eigvals[r - 1] - self.eigvals[r])
