"""Shared random generators for the test suite.

All randomness is seeded through numpy default_rng so every test is
deterministic run to run.
"""

import numpy as np

from kronbures import KroneckerPoint, SpdMatrix


def rand_orthogonal(n, rng):
    """Haar-ish orthogonal matrix from a QR factorization with sign fix."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def rand_spd(n, rng, log_scale=1.0, normalized=False):
    """Well-conditioned SPD matrix with lognormal spectrum.

    normalized=True centers the log-eigenvalues, so the determinant is one.
    """
    xi = log_scale * rng.standard_normal(n)
    if normalized:
        xi = xi - xi.mean()
    d = np.exp(xi)
    q = rand_orthogonal(n, rng)
    return SpdMatrix((q * d) @ q.T)


def rand_point(n, rng, log_scale=1.0):
    """Random gauge-normalized Kronecker model point."""
    return KroneckerPoint(
        u_factor=rand_spd(n, rng, log_scale, normalized=True),
        v_factor=rand_spd(n, rng, log_scale),
    )


def rand_symmetric(n, rng):
    m = rng.standard_normal((n, n))
    return 0.5 * (m + m.T)


def frob(x):
    return float(np.linalg.norm(x))
