"""Dense float64 arithmetic helpers and the seeded random generator.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64;
``as_vector`` / ``as_matrix`` validate shape and finiteness on the way in.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .errors import DimensionError, NonFiniteError, SingularSystemError

# Largest float64 strictly below 1; keeps gate outputs inside the open interval.
_BELOW_ONE = np.nextafter(1.0, 0.0)
_TINY = np.finfo(np.float64).tiny


def as_vector(values, name="vector"):
    v = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if v.size < 1:
        raise DimensionError(f"{name} must have length >= 1")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return v


def as_matrix(values, name="matrix"):
    m = np.array(values, dtype=np.float64, copy=True)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return m


def matvec(m, v):
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionError(f"cannot multiply {m.shape} by {v.shape}")
    return m @ v


def solve_spd(a, b):
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` via Cholesky."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise DimensionError(f"cannot solve system {a.shape} with rhs {b.shape}")
    try:
        factor = cho_factor(a, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"matrix is not symmetric positive definite: {exc}") from exc
    return cho_solve(factor, b, check_finite=False)


def sigmoid(v):
    # clipped so that outputs stay strictly inside (0, 1) in float64
    return np.clip(expit(v), _TINY, _BELOW_ONE)


def tanh_ew(v):
    return np.clip(np.tanh(v), -_BELOW_ONE, _BELOW_ONE)


def hadamard(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"shape mismatch {u.shape} vs {v.shape}")
    return u * v


class SeededRng:
    """Deterministic generator backed by numpy's PCG64 bit generator.

    Equal seeds give bitwise-equal streams. Not thread-safe; give each
    worker its own instance (see ``spawn``).
    """

    def __init__(self, seed):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def spawn(self, key):
        """Child generator whose seed depends only on this seed and ``key``."""
        ss = np.random.SeedSequence([self.seed, int(key) % 2**64])
        return SeededRng(int(ss.generate_state(1, dtype=np.uint64)[0]))
