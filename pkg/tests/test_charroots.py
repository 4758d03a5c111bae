import numpy as np
import pytest

from dtmm.charroots import RootFrame, frames_along, phase_vector, poly_residuals, roots_at, track_frame
from dtmm.coeffs import Problem, eval_coeffs, parse_problem
from dtmm.errors import DegeneracyError

from conftest import random_problem


def test_harmonic_roots():
    assert np.allclose(roots_at([1, 0]), [-1j, 1j], atol=1e-15)


def test_quartic_roots():
    k = roots_at([-1, 0, 0, 0])
    # the set {-1, -j, 1, j}, ordered by real part then imaginary part
    assert np.allclose(k, [-1, -1j, 1j, 1], atol=1e-14)


def test_linear_root():
    assert np.allclose(roots_at([2.5 - 1j]), [-2.5 + 1j])


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
def test_vieta_and_residuals(rng, n):
    for _ in range(20):
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        k = roots_at(a)
        assert abs(np.sum(k) + a[-1]) < 1e-10 * (1 + abs(a[-1]))
        assert abs(np.prod(k) - (-1) ** n * a[0]) < 1e-9 * (1 + abs(a[0]))
        assert poly_residuals(a, k).max() < 1e-12
        # agrees with numpy's companion-matrix roots as a set
        ref = np.roots(np.append(1, a[::-1]))
        assert np.max(np.min(np.abs(k[:, None] - ref[None, :]), axis=1)) < 1e-8


def test_roots_are_lexicographic(rng):
    k = roots_at(rng.normal(size=5) + 1j * rng.normal(size=5))
    keys = list(zip(np.round(k.real, 9), np.round(k.imag, 9)))
    assert keys == sorted(keys)


def test_airy_tracking_keeps_slots(airy):
    prev = track_frame(None, airy, 1.0)
    assert np.allclose(prev.roots, [-1j, 1j])
    nxt = track_frame(prev, airy, 1.001)
    assert np.max(np.abs(nxt.roots - prev.roots)) < 2e-3
    assert np.allclose(nxt.roots, [-1j * np.sqrt(1.001), 1j * np.sqrt(1.001)], atol=1e-14)


def test_constant_problem_roots_never_move(harmonic):
    prev = track_frame(None, harmonic, 0.0)
    for x in (0.5, 1.7, 6.0):
        fr = track_frame(prev, harmonic, x)
        assert np.array_equal(fr.roots, prev.roots)
        assert np.all(fr.droots == 0)


def test_airy_degenerate_at_turning_point(airy):
    with pytest.raises(DegeneracyError) as info:
        track_frame(None, airy, 0.0)
    assert info.value.x == 0.0
    assert info.value.pair == (0, 1)


def test_phase_vector():
    assert np.all(phase_vector(RootFrame.from_roots([-1j, 1j], x=0.0)) == 0)
    assert np.allclose(phase_vector(RootFrame.from_roots([-1j, 1j], x=2.0)), [-2j, 2j])
    k = [-1, -1j, 1, 1j]
    assert np.allclose(phase_vector(RootFrame.from_roots(k, x=1.0)), k)


def test_root_derivatives_match_differences(rng):
    # d k / dx from the implicit derivative vs central differences of tracked roots
    for n in (2, 3, 4):
        p = random_problem(rng, n, domain=(0, 2))
        x = 1.0
        fr = track_frame(None, p, x)
        errs = []
        for h in (1e-3, 5e-4):
            lo = track_frame(fr, p, x - h)
            hi = track_frame(fr, p, x + h)
            fd = (hi.roots - lo.roots) / (2 * h)
            errs.append(np.max(np.abs(fd - fr.droots)))
        assert errs[0] < 1e-5
        assert 3.0 < errs[0] / errs[1] < 5.0   # O(h^2)


def test_tracked_path_is_continuous(rng):
    for n in (2, 3, 4, 5):
        p = random_problem(rng, n, domain=(0, 3))
        xs = np.linspace(0, 3, 601)
        start = track_frame(None, p, 0.0)
        K, dK, gaps = frames_along(p, xs, start)
        jumps = np.max(np.abs(np.diff(K, axis=0)), axis=1)
        bound = np.max(np.abs(dK), axis=1)[:-1] * np.diff(xs) * 2 + 1e-12
        assert np.all(jumps <= bound)
        a = eval_coeffs(p, xs)
        for i in range(0, xs.size, 50):
            assert poly_residuals(a[:, i], K[i]).max() < 1e-10


def test_slot_assignment_stable_under_refinement(rng):
    for n in (2, 3, 4):
        p = random_problem(rng, n, domain=(0, 3))
        start = track_frame(None, p, 0.0)
        coarse = np.linspace(0, 3, 61)
        fine = np.linspace(0, 3, 121)
        Kc, _, _ = frames_along(p, coarse, start)
        Kf, _, _ = frames_along(p, fine, start)
        assert np.max(np.abs(Kc - Kf[::2])) < 1e-12


def test_tracking_through_a_crossing_of_real_parts():
    # k^2 + i x k - 1: two roots whose real and imaginary orders swap along the path,
    # tracking must follow each branch instead of re-sorting
    p = Problem.from_strings(["-1", "1j*x"], (-1, 1))
    xs = np.linspace(-1, 1, 401)
    start = track_frame(None, p, -1.0)
    K, _, _ = frames_along(p, xs, start)
    assert np.max(np.abs(np.diff(K, axis=0))) < 0.02
