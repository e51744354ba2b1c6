"""Independent reference computations used by the tests.

Nothing here calls the package code under test except ``random_point``-style
inputs, so each oracle checks the implementation by a separate route.
"""

import numpy as np


def random_tangent(u, rng, norm=None):
    xi = rng.standard_normal(u.shape)
    xi -= u @ (u.T @ xi)
    if norm is not None:
        xi *= norm / np.linalg.norm(xi)
    return xi


def arccos_angles(a, b):
    """Textbook principal angles: arccos of the singular values of a^T b."""
    s = np.linalg.svd(a.T @ b, compute_uv=False)
    return np.arccos(np.clip(s, 0.0, 1.0))


def same_span_gap(a, b):
    """Frobenius distance between the orthogonal projectors onto span(a) and span(b)."""
    return np.linalg.norm(a @ a.T - b @ b.T)


def midpoint_oracle(a, b):
    """Geodesic midpoint from principal vectors: bisect each pair of them."""
    y, _, zt = np.linalg.svd(a.T @ b)
    mid = a @ y + b @ zt.T
    return mid / np.linalg.norm(mid, axis=0)


def ridge_weights_oracle(u, dense, mask, reg):
    """Per-column ridge regression solved as an augmented least-squares problem."""
    m, r = u.shape
    w = np.zeros((dense.shape[1], r))
    for j in range(dense.shape[1]):
        obs = mask[:, j]
        if not obs.any():
            continue
        a = np.vstack([u[obs], np.sqrt(reg) * np.eye(r)])
        y = np.concatenate([dense[obs, j], np.zeros(r)])
        w[j] = np.linalg.lstsq(a, y, rcond=None)[0]
    return w


def dense_cost(u, w, dense, mask):
    res = np.where(mask, u @ w.T - dense, 0.0)
    return 0.5 * np.sum(res**2)


def alternating_completion(dense, mask, r, iters=300, seed=0):
    """Plain alternating least squares on the observed entries; returns the full estimate."""
    rng = np.random.default_rng(seed)
    m, n = dense.shape
    a = rng.standard_normal((m, r))
    b = np.zeros((n, r))
    for _ in range(iters):
        for j in range(n):
            obs = mask[:, j]
            b[j] = np.linalg.lstsq(a[obs], dense[obs, j], rcond=None)[0]
        for i in range(m):
            obs = mask[i]
            a[i] = np.linalg.lstsq(b[obs], dense[i, obs], rcond=None)[0]
    return a @ b.T
