"""Bijection between constrained latent states and the sampler's flat vector.

Memberships use per-row stick-breaking with the usual uniform-at-zero offset
(so the all-zero vector maps to the uniform simplex point), connectivity uses
an entrywise logit, influence and coefficients pass through unchanged.

Flat layout: membership rows (N x (C-1), row-major), connectivity (C*C),
influence (C*C), coefficients (D).
"""

from dataclasses import dataclass

import numpy as np

from .data import LatentState


@dataclass(frozen=True)
class UnconstrainedState:
    """Sampler-side coordinates; transform() always yields a valid state."""

    membership_raw: np.ndarray
    connectivity_raw: np.ndarray
    influence_raw: np.ndarray
    coefficients_raw: np.ndarray

    @property
    def n_blocks(self):
        return self.connectivity_raw.shape[0]

    def flatten(self):
        return np.concatenate([
            np.asarray(self.membership_raw, dtype=float).ravel(),
            np.asarray(self.connectivity_raw, dtype=float).ravel(),
            np.asarray(self.influence_raw, dtype=float).ravel(),
            np.asarray(self.coefficients_raw, dtype=float).ravel(),
        ])


def dimension(n, c, d):
    return n * (c - 1) + 2 * c * c + d


def unflatten(u, n, c, d):
    u = np.asarray(u, dtype=float)
    if u.shape != (dimension(n, c, d),):
        raise ValueError(f"expected flat vector of length {dimension(n, c, d)}, got {u.shape}")
    nm = n * (c - 1)
    return UnconstrainedState(
        membership_raw=u[:nm].reshape(n, c - 1),
        connectivity_raw=u[nm:nm + c * c].reshape(c, c),
        influence_raw=u[nm + c * c:nm + 2 * c * c].reshape(c, c),
        coefficients_raw=u[nm + 2 * c * c:].copy(),
    )


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _stick_break_rows(raw):
    """Map rows of raw (N, C-1) to simplex rows (N, C)."""
    n, cm1 = raw.shape
    c = cm1 + 1
    m = np.empty((n, c))
    rem = np.ones(n)
    for k in range(cm1):
        z = _sigmoid(raw[:, k] - np.log(c - 1 - k))
        m[:, k] = rem * z
        rem = rem * (1.0 - z)
    m[:, c - 1] = rem
    return m


def transform(u):
    """Unconstrained -> constrained LatentState."""
    return LatentState(
        membership=_stick_break_rows(np.atleast_2d(u.membership_raw)),
        connectivity=_sigmoid(u.connectivity_raw),
        influence=np.asarray(u.influence_raw, dtype=float),
        coefficients=np.asarray(u.coefficients_raw, dtype=float),
    )


def inverse_transform(state):
    """Constrained -> unconstrained; mutual inverse of transform within 1e-9."""
    m = np.asarray(state.membership, dtype=float)
    n, c = m.shape
    raw = np.empty((n, c - 1))
    rem = np.ones(n)
    for k in range(c - 1):
        z = np.clip(m[:, k] / np.maximum(rem, 1e-300), 1e-15, 1 - 1e-15)
        raw[:, k] = np.log(z) - np.log1p(-z) + np.log(c - 1 - k)
        rem = rem - m[:, k]
    b = np.clip(state.connectivity, 1e-15, 1 - 1e-15)
    return UnconstrainedState(
        membership_raw=raw,
        connectivity_raw=np.log(b) - np.log1p(-b),
        influence_raw=np.asarray(state.influence, dtype=float).copy(),
        coefficients_raw=np.asarray(state.coefficients, dtype=float).copy(),
    )


def log_jacobian(u):
    """log |det d(constrained)/d(unconstrained)|; identity blocks add zero."""
    raw = np.atleast_2d(u.membership_raw)
    n, cm1 = raw.shape
    c = cm1 + 1
    total = 0.0
    rem = np.ones(n)
    with np.errstate(divide="ignore"):
        for k in range(cm1):
            x = raw[:, k] - np.log(c - 1 - k)
            # log z + log(1-z) computed stably as -softplus(-x) - softplus(x)
            total += float(np.sum(-np.logaddexp(0.0, -x) - np.logaddexp(0.0, x) + np.log(rem)))
            rem = rem * (1.0 - _sigmoid(x))
    v = np.asarray(u.connectivity_raw, dtype=float)
    total += float(np.sum(-np.logaddexp(0.0, -v) - np.logaddexp(0.0, v)))
    return total
