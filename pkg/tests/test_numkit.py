"""Counting conventions, counted linear-algebra kernels, and seeding."""

import threading

import numpy as np
import pytest

from unfoldrx import numkit
from unfoldrx.errors import NumericalError


def random_hpd(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a @ a.conj().T + n * np.eye(n)


def test_counting_constants():
    assert (numkit.CC, numkit.CR, numkit.RR) == (4, 2, 1)


def test_gram_mults_symmetry():
    b, u = 8, 4
    # full product: u^2 complex dots of length b; symmetric: u(u+1)/2 of them
    assert numkit.gram_mults(b, u, use_symmetry=False) == 4 * b * u * u
    assert numkit.gram_mults(b, u, use_symmetry=True) == 4 * b * u * (u + 1) // 2


def test_lu_inverse_mults_formula():
    for n in (2, 4, 16):
        assert numkit.lu_inverse_mults(n) == 4 * n ** 3 + 2 * n


def test_hpd_inverse_mults_below_lu():
    for n in (2, 4, 16):
        assert numkit.hpd_inverse_mults(n) < numkit.lu_inverse_mults(n)


def test_gram_matches_numpy_and_counts():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(3, 8, 4)) + 1j * rng.normal(size=(3, 8, 4))
    def run():
        return numkit.gram(h)
    g, n = numkit.counted_scope(run)
    ref = np.einsum("fbu,fbv->fuv", h.conj(), h)
    assert np.allclose(g, ref)
    assert n == 3 * numkit.gram_mults(8, 4)
    assert np.allclose(g, np.swapaxes(g, -1, -2).conj())


def test_hpd_inverse_matches_numpy():
    rng = np.random.default_rng(1)
    a = random_hpd(rng, 4)
    inv, n = numkit.counted_scope(lambda: numkit.hpd_inverse(a))
    assert np.allclose(inv, np.linalg.inv(a))
    assert n == numkit.hpd_inverse_mults(4)


def test_hpd_solve_matches_numpy():
    rng = np.random.default_rng(2)
    a = random_hpd(rng, 4)
    b = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    x, _ = numkit.counted_scope(lambda: numkit.hpd_solve(a, b))
    assert np.allclose(a @ x, b)


def test_lu_inverse_matches_numpy():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
    inv, n = numkit.counted_scope(lambda: numkit.lu_inverse(a))
    assert np.allclose(inv, np.linalg.inv(a))
    assert n == 2 * numkit.lu_inverse_mults(4)


def test_hpd_inverse_rejects_non_hpd():
    with pytest.raises(NumericalError):
        numkit.hpd_inverse(np.array([[1.0, 0.0], [0.0, -1.0]],
                                    dtype=np.complex128))


def test_counter_nesting():
    with numkit.MulCounter() as outer:
        numkit.add_mults(5)
        with numkit.MulCounter() as inner:
            numkit.add_mults(7)
    assert inner.real_mults == 7
    assert outer.real_mults == 12


def test_counters_are_thread_local():
    seen = {}

    def work(key, n):
        with numkit.MulCounter() as c:
            for _ in range(50):
                numkit.add_mults(n)
        seen[key] = c.real_mults

    threads = [threading.Thread(target=work, args=(k, k + 1)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert seen == {k: 50 * (k + 1) for k in range(4)}


def test_make_rng_deterministic_and_keyed():
    a = numkit.make_rng(5, 1).normal(size=4)
    b = numkit.make_rng(5, 1).normal(size=4)
    c = numkit.make_rng(5, 2).normal(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
