"""Complex dense linear algebra with real-multiplication counting, plus seeded RNG.

Matrices are plain complex128 numpy arrays (row-major).  Counting convention,
used consistently by every counted routine in the toolkit:

* one complex*complex multiplication   -> 4 real multiplications
* one complex*real multiplication      -> 2 real multiplications
* one real*real multiplication         -> 1 real multiplication
* a division is priced like the corresponding multiplication
  (reciprocal-and-multiply)
* additions, comparisons, square roots, exponentials and multiplications by
  powers of two (shifts) are free

Counters form a stack: every active counter sees the multiplies of any scope
nested inside it.
"""

from __future__ import annotations

import threading
from typing import Callable, Tuple

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalError

# ---------------------------------------------------------------------------
# multiply counting

CC = 4  # real mults per complex*complex product
CR = 2  # real mults per complex*real product
RR = 1


class MulCounter:
    """Accumulates real-multiplication counts; monotonically non-decreasing."""

    def __init__(self) -> None:
        self.real_mults = 0

    def add(self, n: int) -> None:
        if n < 0:
            raise ConfigurationError("multiply count increments must be >= 0")
        self.real_mults += int(n)

    def __enter__(self) -> "MulCounter":
        _active_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_stack().remove(self)


_ACTIVE = threading.local()


def _active_stack() -> list:
    stack = getattr(_ACTIVE, "stack", None)
    if stack is None:
        stack = _ACTIVE.stack = []
    return stack


def add_mults(n: int) -> None:
    """Credit ``n`` real multiplications to every counter active in this thread."""
    for c in _active_stack():
        c.add(n)


def counted_scope(f: Callable[[], object]) -> Tuple[object, int]:
    """Run ``f`` and return ``(result, real_mults)`` executed inside the scope."""
    with MulCounter() as c:
        result = f()
    return result, c.real_mults


# closed-form counts for the dense kernels below ----------------------------

def gram_mults(b: int, u: int, use_symmetry: bool = True) -> int:
    """Real mults of ``H^H H`` for a b-by-u matrix."""
    if use_symmetry:
        return CC * b * u * (u + 1) // 2
    return CC * b * u * u


def cholesky_mults(n: int) -> int:
    """Factor an n-by-n Hermitian positive definite matrix."""
    return CC * (n**3 - n) // 6 + CR * n * (n - 1) // 2


def tri_solve_mults(n: int, nrhs: int = 1) -> int:
    """One forward plus one backward substitution with a Cholesky factor."""
    return nrhs * (2 * (CC * n * (n - 1) // 2) + 2 * CR * n)


def hpd_inverse_mults(n: int) -> int:
    """Explicit inverse of an HPD matrix via Cholesky (symmetry exploited)."""
    factor = cholesky_mults(n)
    invert_l = CC * (n**3 - n) // 6 + CR * n
    assemble = CC * n * (n + 1) * (n + 2) // 6
    return factor + invert_l + assemble


def lu_inverse_mults(n: int) -> int:
    """Explicit inverse of a general n-by-n matrix via LU."""
    return CC * n**3 + CR * n


# ---------------------------------------------------------------------------
# kernels

def gram(h: np.ndarray, use_symmetry: bool = True) -> np.ndarray:
    """Gram matrix ``H^H H`` of one or a batch of (..., b, u) matrices."""
    h = np.asarray(h)
    if h.ndim < 2:
        raise ConfigurationError(f"gram expects a matrix, got shape {h.shape}")
    b, u = h.shape[-2:]
    if b < u or u < 1:
        raise ConfigurationError(f"gram expects b >= u >= 1, got {b}x{u}")
    batch = int(np.prod(h.shape[:-2], dtype=np.int64)) if h.ndim > 2 else 1
    add_mults(batch * gram_mults(b, u, use_symmetry))
    hh = np.conj(np.swapaxes(h, -1, -2))
    return hh @ h


def hpd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian positive definite ``A`` via Cholesky."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    n = a.shape[-1]
    if a.shape[-2] != n:
        raise ConfigurationError(f"hpd_solve needs a square matrix, got {a.shape}")
    rhs = b if b.ndim >= 2 else b[:, None]
    if rhs.shape[-2] != n:
        raise ConfigurationError(
            f"rhs rows {rhs.shape[-2]} do not match system size {n}")
    try:
        l = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"matrix is not positive definite: {e}") from e
    pivot_tol = 1e-12 * np.linalg.norm(a, axis=(-2, -1), keepdims=True)
    diag = np.abs(np.diagonal(l, axis1=-2, axis2=-1))
    if np.any(diag**2 <= pivot_tol[..., 0]):
        raise NumericalError("Cholesky pivot below tolerance; matrix "
                             "is numerically indefinite")
    batch = int(np.prod(a.shape[:-2], dtype=np.int64)) if a.ndim > 2 else 1
    nrhs = rhs.shape[-1]
    add_mults(batch * (cholesky_mults(n) + tri_solve_mults(n, nrhs)))
    if a.ndim == 2:
        y = scipy.linalg.solve_triangular(l, rhs, lower=True)
        x = scipy.linalg.solve_triangular(np.conj(l.T), y, lower=False)
    else:
        y = np.linalg.solve(l, rhs)
        x = np.linalg.solve(np.conj(np.swapaxes(l, -1, -2)), y)
    return x if b.ndim >= 2 else x[..., 0]


def hpd_inverse(a: np.ndarray) -> np.ndarray:
    """Explicit inverse of (a batch of) HPD matrices, counted via Cholesky."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[-1]
    try:
        np.linalg.cholesky(a)  # definiteness check; keeps count honest below
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"matrix is not positive definite: {e}") from e
    batch = int(np.prod(a.shape[:-2], dtype=np.int64)) if a.ndim > 2 else 1
    add_mults(batch * hpd_inverse_mults(n))
    return np.linalg.inv(a)


def lu_inverse(a: np.ndarray) -> np.ndarray:
    """Explicit inverse of (a batch of) general square matrices via LU."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[-1]
    batch = int(np.prod(a.shape[:-2], dtype=np.int64)) if a.ndim > 2 else 1
    add_mults(batch * lu_inverse_mults(n))
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"singular matrix: {e}") from e


# ---------------------------------------------------------------------------
# random number generation

def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Seeded PCG64 generator; ``key`` derives independent sub-streams.

    Identical (seed, key) always yields a bit-identical stream, which is what
    makes every experiment reproducible and worker-count independent.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
