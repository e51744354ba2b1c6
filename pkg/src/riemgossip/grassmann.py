"""Closed-form geometry of the Grassmann manifold Gr(r, m).

A point is stored as an ``m x r`` matrix with orthonormal columns; any
``U @ O`` with ``O`` orthogonal represents the same subspace. Tangent
vectors at ``U`` are ``m x r`` matrices ``xi`` with ``U.T @ xi == 0``.

All functions are pure and operate on plain numpy arrays.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SingularOverlap",
    "CUT_LOCUS_TOL",
    "random_point",
    "check_point",
    "project_to_tangent",
    "exp_map",
    "log_map",
    "geodesic_distance",
    "principal_angles",
]

# smallest admissible singular value of from.T @ to in log_map
CUT_LOCUS_TOL = 1e-12


class SingularOverlap(ArithmeticError):
    """Raised when two subspaces are (numerically) at the cut locus of each other."""

    def __init__(self, sigma_min: float):
        super().__init__(
            f"subspaces have a principal angle of pi/2 "
            f"(smallest singular value of U1^T U2 = {sigma_min:.3e} < {CUT_LOCUS_TOL:g})"
        )
        self.sigma_min = sigma_min


def _orthonormalize(a: np.ndarray) -> np.ndarray:
    # QR with the sign of diag(R) fixed positive, so that a nearly
    # orthonormal input comes back nearly unchanged.
    q, rr = np.linalg.qr(a)
    signs = np.sign(np.diag(rr))
    signs[signs == 0] = 1.0
    return q * signs


def random_point(m: int, r: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Draw a uniformly distributed point of Gr(r, m).

    ``rng`` may be a Generator or a seed; the result is deterministic given the seed.
    """
    # m == r is the one-point manifold; allowed so that full-space bases can be drawn
    if r < 1 or m < r:
        raise ValueError(f"invalid Grassmann dimensions m={m}, r={r}: need m >= r >= 1")
    rng = np.random.default_rng(rng)
    return _orthonormalize(rng.standard_normal((m, r)))


def check_point(u: np.ndarray, tol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``u`` has orthonormal columns."""
    if u.ndim != 2 or u.shape[1] < 1 or u.shape[0] < u.shape[1]:
        raise ValueError(f"not a Grassmann point representative: shape {u.shape}")
    err = np.linalg.norm(u.T @ u - np.eye(u.shape[1]))
    if not err < tol:
        raise ValueError(f"columns are not orthonormal: ||U^T U - I||_F = {err:.3e}")


def project_to_tangent(base: np.ndarray, ambient: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient ``m x r`` matrix onto the tangent space at ``base``."""
    if ambient.shape != base.shape:
        raise ValueError(f"shape mismatch: base {base.shape}, ambient {ambient.shape}")
    return ambient - base @ (base.T @ ambient)


def exp_map(base: np.ndarray, tangent: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Follow the geodesic from ``base`` along ``scale * tangent`` for unit time.

    With ``W S V^T`` the thin SVD of ``scale * tangent`` the endpoint is
    ``base V cos(S) V^T + W sin(S) V^T``, re-orthonormalized to remove drift.
    """
    if tangent.shape != base.shape:
        raise ValueError(f"shape mismatch: base {base.shape}, tangent {tangent.shape}")
    xi = scale * tangent
    if not np.all(np.isfinite(xi)):
        raise FloatingPointError("non-finite tangent vector passed to exp_map")
    if not np.any(xi):
        return base.copy()
    w, s, vt = np.linalg.svd(xi, full_matrices=False)
    moved = (base @ vt.T) * np.cos(s) @ vt + (w * np.sin(s)) @ vt
    return _orthonormalize(moved)


def log_map(origin: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Tangent vector at ``origin`` pointing to ``target`` along the shortest geodesic.

    Computes ``P arctan(S) Q^T`` where ``P S Q^T`` is the thin SVD of
    ``(target - origin M) M^{-1}`` with ``M = origin^T target``. The result
    does not depend on which orthonormal basis represents ``target``.

    Raises
    ------
    SingularOverlap
        If ``M`` is numerically singular (some principal angle is pi/2).
    """
    if origin.shape != target.shape:
        raise ValueError(f"shape mismatch: {origin.shape} vs {target.shape}")
    overlap = origin.T @ target
    sigma_min = np.linalg.svd(overlap, compute_uv=False)[-1]
    if not sigma_min >= CUT_LOCUS_TOL:
        raise SingularOverlap(float(sigma_min))
    # (target - origin M) M^{-1} without forming the inverse
    diff = target - origin @ overlap
    t = np.linalg.solve(overlap.T, diff.T).T
    p, s, qt = np.linalg.svd(t, full_matrices=False)
    return (p * np.arctan(s)) @ qt


def geodesic_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Riemannian distance between the subspaces spanned by ``a`` and ``b``."""
    return float(np.linalg.norm(log_map(a, b)))


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between span(a) and span(b), ascending, in [0, pi/2].

    Angles are ``arccos`` of the singular values of ``a.T @ b`` (clamped to
    [0, 1]). Where the cosine exceeds 1/sqrt(2) the angle is instead taken
    from the sine, i.e. the singular values of ``b - a a^T b``, since arccos
    loses half the digits near 1.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    cosines = np.clip(np.linalg.svd(a.T @ b, compute_uv=False), 0.0, 1.0)
    sines = np.clip(np.linalg.svd(b - a @ (a.T @ b), compute_uv=False), 0.0, 1.0)[::-1]
    return np.where(cosines**2 < 0.5, np.arccos(cosines), np.arcsin(sines))
