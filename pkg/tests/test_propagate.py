import numpy as np
import pytest

from dtmm.charroots import RootFrame, track_frame
from dtmm.coeffs import Problem, parse_problem
from dtmm.errors import DegeneracyError, EntirelyDegenerateError
from dtmm.linalg import mat_exp, vandermonde_inverse
from dtmm.oracle import oracle_states
from dtmm.propagate import (
    CANONICAL_JUMPS,
    SingularityReport,
    find_singularities,
    integrate_coeff,
    kernel_at,
    kernel_sqrt_form,
    kernel_general,
    march_nodes,
    propagate_exp,
    propagate_ode,
    propagate_robust,
    singular_jump,
    step_halving_error,
    transfer_det_formula,
)

from conftest import random_problem

SQ2 = np.sqrt(2.0)
EC_LAMBDAS = np.array(
    [s * 0.5 * np.sqrt(complex(5 + t * 4 * SQ2)) for s in (1, -1) for t in (1, -1)])


def set_distance(a, b):
    """Largest distance from an element of a to the nearest element of b (and back)."""
    d = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def euler_cauchy_kernel_closed_form(x, a=1.0):
    """Closed-form kernel for a0 = -a^4/x^4 under the ordering k = (-1, -j, 1, j) a/x."""
    j = 1j
    E = np.exp
    return -1 / (2 * x) * np.array([
        [2 * a - 3, (1 + j) * E((1 - j) * a), E(2 * a), (1 - j) * E((1 + j) * a)],
        [(1 - j) * E((j - 1) * a), 2 * j * a - 3, (1 + j) * E((1 + j) * a), E(2 * j * a)],
        [E(-2 * a), (1 - j) * E(-(1 + j) * a), -2 * a - 3, (1 + j) * E((j - 1) * a)],
        [(1 + j) * E(-(1 + j) * a), E(-2 * j * a), (1 - j) * E((1 - j) * a), -2 * a * j - 3],
    ])


def oracle_transfer(p, x1, x2, fr1, fr2):
    """Envelope map built from companion-system solutions for unit initial vectors."""
    res = oracle_states(p, x1, np.eye(p.n), np.array([x2]))
    Y2 = res.states[0]
    F1 = np.exp(-x1 * fr1.roots)[:, None] * vandermonde_inverse(fr1)
    F2 = np.exp(-x2 * fr2.roots)[:, None] * (vandermonde_inverse(fr2) @ Y2)
    return F2 @ np.linalg.inv(F1)


# -- kernel ------------------------------------------------------------------------

def test_constant_coefficients_give_zero_kernel(harmonic):
    for x in (0.0, 1.0, 5.0):
        assert np.max(np.abs(kernel_at(harmonic, track_frame(None, harmonic, x)))) == 0


def test_first_order_kernel():
    p = parse_problem("order=1; a0=x; domain=[0,1]")
    for x in (0.25, 0.5, 1.0):
        assert kernel_at(p, track_frame(None, p, x))[0, 0] == pytest.approx(x, abs=1e-15)
    _, te = propagate_exp(p, 0.0, 1.0)
    assert te.M[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_euler_cauchy_kernel_at_one(euler_cauchy):
    base = track_frame(None, euler_cauchy, 1.0)
    perm = [int(np.argmin(np.abs(base.roots - k))) for k in (-1, -1j, 1, 1j)]
    fr = base.permuted(perm)
    U = kernel_at(euler_cauchy, fr)
    assert np.max(np.abs(U - euler_cauchy_kernel_closed_form(1.0))) < 1e-13
    N = U - 1.5 * np.eye(4)
    assert abs(np.trace(N)) < 1e-13
    assert set_distance(np.linalg.eigvals(N), EC_LAMBDAS) < 1e-12


def test_euler_cauchy_kernel_scales_as_one_over_x(euler_cauchy):
    for x in (1.2, 1.7, 2.0):
        fr = track_frame(None, euler_cauchy, x)
        U = kernel_at(euler_cauchy, fr)
        ref = kernel_at(euler_cauchy, track_frame(None, euler_cauchy, 1.0))
        assert np.max(np.abs(x * U - ref)) < 1e-12


def test_two_by_two_fast_path_matches_general(rng):
    for _ in range(10):
        p = random_problem(rng, 2, domain=(0, 2))
        fr = track_frame(None, p, rng.uniform(0, 2))
        assert np.max(np.abs(kernel_at(p, fr) - kernel_general(fr))) < 1e-12


def test_sqrt_form_kernel():
    p = parse_problem("order=2; a0=2+sin(x); domain=[0,3]")
    for x in (0.3, 1.0, 2.5):
        a0 = 2 + np.sin(x)
        k = np.sqrt(a0)
        fr = RootFrame(x, [-1j * k, 1j * k], [-1j * np.cos(x) / (2 * k), 1j * np.cos(x) / (2 * k)],
                       2 * k)
        assert np.max(np.abs(kernel_sqrt_form(x, a0, np.cos(x)) - kernel_general(fr))) < 1e-13
        assert np.max(np.abs(kernel_at(p, fr) - kernel_general(fr))) < 1e-13


def test_kernel_rejects_degenerate_frame(airy):
    with pytest.raises(DegeneracyError):
        kernel_at(airy, RootFrame.from_roots([1e-9, -1e-9], x=0.0))


# -- propagation -------------------------------------------------------------------------

def test_zero_length_is_identity(airy):
    assert np.array_equal(propagate_ode(airy, 1.0, 1.0).Q, np.eye(2))
    tm, te = propagate_exp(airy, 1.0, 1.0)
    assert np.array_equal(tm.Q, np.eye(2)) and np.all(te.M == 0)


def test_constant_coefficients_are_identity(harmonic):
    assert np.max(np.abs(propagate_ode(harmonic, 0.0, 4.0).Q - np.eye(2))) < 1e-14
    assert np.max(np.abs(propagate_exp(harmonic, 0.0, 4.0)[0].Q - np.eye(2))) < 1e-14


def test_sine_perturbed_determinant():
    p = parse_problem("order=2; a0=2+sin(x); domain=[0,1]")
    tm = propagate_ode(p, 0.0, 1.0)
    want = np.sqrt(2) / np.sqrt(2 + np.sin(1))
    assert abs(tm.det - want) < 1e-6
    assert abs(transfer_det_formula(p, tm.frame_from, tm.frame_to) - want) < 1e-12


def test_sine_perturbed_against_oracle():
    p = parse_problem("order=2; a0=2+sin(x); domain=[0,1]")
    tm = propagate_ode(p, 0.0, 1.0)
    ref = oracle_transfer(p, 0.0, 1.0, tm.frame_from, tm.frame_to)
    assert np.max(np.abs(tm.Q - ref)) < 1e-8


def test_general_n_against_oracle(rng):
    for n in (1, 3, 4):
        p = random_problem(rng, n, domain=(0, 1))
        tm = propagate_ode(p, 0.0, 1.0)
        ref = oracle_transfer(p, 0.0, 1.0, tm.frame_from, tm.frame_to)
        assert np.max(np.abs(tm.Q - ref)) < 1e-7 * max(1, np.max(np.abs(ref)))


def test_backward_propagation_inverts(rng):
    p = random_problem(rng, 3, domain=(0, 1))
    fwd = propagate_ode(p, 0.0, 1.0)
    back = propagate_ode(p, 1.0, 0.0, start=fwd.frame_to)
    assert np.max(np.abs(back.Q @ fwd.Q - np.eye(3))) < 1e-10


def test_rk4_is_fourth_order(rng):
    for n in (2, 3):
        p = random_problem(rng, n, domain=(0, 1)).with_options(step=0.05)
        e1 = step_halving_error(p, 0.0, 1.0)
        e2 = step_halving_error(p.with_options(step=0.025), 0.0, 1.0)
        assert e1 / e2 >= 12


def test_first_order_exp_equals_ode(rng):
    for _ in range(5):
        p = random_problem(rng, 1, domain=(0, 2))
        assert abs(propagate_exp(p, 0.0, 2.0)[0].Q[0, 0] - propagate_ode(p, 0.0, 2.0).Q[0, 0]) < 1e-9


def test_euler_cauchy_exponent(euler_cauchy):
    tm, te = propagate_exp(euler_cauchy, 1.0, 2.0)
    N = kernel_at(euler_cauchy, tm.frame_from) - 1.5 * np.eye(4)
    ln2 = np.log(2.0)
    assert np.max(np.abs(te.M - (1.5 * ln2 * np.eye(4) + ln2 * N))) < 1e-10
    assert tm.det == pytest.approx(64, rel=1e-10)
    # M splits into the jump part and the integrated roots
    assert np.max(np.abs(te.M - te.J - te.T)) < 1e-12
    ode = propagate_ode(euler_cauchy, 1.0, 2.0)
    assert np.max(np.abs(ode.Q - tm.Q)) < 1e-8 * np.max(np.abs(tm.Q))


def test_euler_cauchy_det_formula(euler_cauchy):
    fr1 = track_frame(None, euler_cauchy, 1.0)
    fr2 = track_frame(None, euler_cauchy, 2.0)
    assert transfer_det_formula(euler_cauchy, fr1, fr1) == pytest.approx(1)
    assert transfer_det_formula(euler_cauchy, fr1, fr2) == pytest.approx(64, rel=1e-12)


def test_det_formula_with_damping(rng):
    # a_{n-1} != 0 exercises the exponential factor
    for n in (2, 3):
        p = random_problem(rng, n, domain=(0, 1.5))
        tm = propagate_ode(p, 0.0, 1.5)
        ref = transfer_det_formula(p, tm.frame_from, tm.frame_to)
        assert abs(tm.det - ref) < 1e-8 * abs(ref)
        assert abs(propagate_exp(p, 0.0, 1.5)[0].det - ref) < 1e-8 * abs(ref)


def test_integrate_coeff():
    p = parse_problem("order=3; a0=1; a2=x; domain=[0,2]")
    assert integrate_coeff(p, 2, 0.0, 2.0) == pytest.approx(2.0, abs=1e-14)
    assert integrate_coeff(p, 1, 0.0, 2.0) == 0


def test_graded_nodes():
    nodes = march_nodes(-2.0, -1e-3, 0.01, anchors=[0.0])
    h = np.diff(nodes)
    dist = np.abs(nodes[:-1])
    assert np.all(h <= 0.01 * (1 + 1e-12))
    assert np.all(h <= 0.05 * dist * (1 + 1e-9))
    assert nodes[0] == -2.0 and nodes[-1] == -1e-3
    assert np.array_equal(march_nodes(0, 1, 0.25), np.linspace(0, 1, 5))


# -- singular points ------------------------------------------------------------------------

def test_airy_singularity(airy):
    (s,) = find_singularities(airy)
    assert abs(s.xi) < 1e-12 and s.kind == "A"


def test_mirrored_airy_singularity():
    (s,) = find_singularities(parse_problem("order=2; a0=-x; domain=[-2,2]"))
    assert abs(s.xi) < 1e-12 and s.kind == "B"


def test_no_singularities():
    assert find_singularities(parse_problem("order=2; a0=2+sin(x); domain=[0,10]")) == []


def test_two_singularities():
    s = find_singularities(parse_problem("order=2; a0=x^2-1; domain=[-2,2]"))
    assert [r.kind for r in s] == ["B", "A"]
    assert np.allclose([r.xi for r in s], [-1, 1], atol=1e-12)


def test_touching_double_root_is_type_c():
    (s,) = find_singularities(parse_problem("order=2; a0=x^2; domain=[-1,1.3]"))
    assert s.kind == "C" and abs(s.xi) < 1e-6


def test_damped_singularity_uses_shifted_discriminant():
    # a0 - a1^2/4 = x: the same turning point as Airy
    (s,) = find_singularities(parse_problem("order=2; a0=x+0.25; a1=1; domain=[-2,2]"))
    assert abs(s.xi) < 1e-12 and s.kind == "A"


def test_entirely_degenerate():
    with pytest.raises(EntirelyDegenerateError):
        find_singularities(parse_problem("order=2; a0=0; domain=[0,1]"))
    with pytest.raises(EntirelyDegenerateError):
        find_singularities(parse_problem("order=2; a0=abs(x)-x; domain=[-1,1]"))


@pytest.mark.parametrize("text, kind", [
    ("order=2; a0=x; domain=[-2,2]", "A"),
    ("order=2; a0=-x; domain=[-2,2]", "B"),
    ("order=2; a0=x^2; domain=[-2,2.1]", "C"),
])
def test_singular_jump_limits(text, kind):
    p = parse_problem(text)
    (s,) = find_singularities(p)
    ref = CANONICAL_JUMPS[kind]
    d = []
    for dx in (1e-3, 2.5e-4, 6.25e-5):
        d.append(np.max(np.abs(singular_jump(p.with_options(jump_half_width=dx), s).Q - ref)))
    assert d[0] < 5e-2
    assert d[0] > d[1] > d[2]


def test_singular_jump_canonical_matrices():
    assert np.allclose(CANONICAL_JUMPS["A"], [[(1 + 1j) / 2, (1 - 1j) / 2], [(1 - 1j) / 2, (1 + 1j) / 2]])
    assert np.allclose(CANONICAL_JUMPS["B"], [[(1 - 1j) / 2, (1 + 1j) / 2], [(1 + 1j) / 2, (1 - 1j) / 2]])


def test_singular_jump_reverse_direction(airy):
    (s,) = find_singularities(airy)
    fwd = singular_jump(airy, s, direction=1)
    back = singular_jump(airy, s, near=fwd.frame_to, direction=-1)
    assert np.max(np.abs(back.Q @ fwd.Q - np.eye(2))) < 1e-10


def test_higher_order_singular_jump_is_finite():
    # (k - 1)^2 (k + 2) + x: a double root at x = 0, continued around it through the upper half plane
    p = Problem.from_strings(["2+x", "-3", "0"], (-1, 1))
    (s,) = find_singularities(p)
    jm = singular_jump(p, s)
    assert np.all(np.isfinite(jm.Q))
    assert abs(jm.det - transfer_det_formula(p, jm.frame_from, jm.frame_to)) < 1e-9 * abs(jm.det)


# -- robust propagation --------------------------------------------------------------------

def test_robust_equals_ode_without_singularities(rng):
    p = random_problem(rng, 2, domain=(0, 1))
    assert np.array_equal(propagate_robust(p, 0.0, 1.0).Q, propagate_ode(p, 0.0, 1.0).Q)


def test_robust_airy_against_oracle(airy):
    tm = propagate_robust(airy, -2.0, 2.0)
    ref = oracle_transfer(airy, -2.0, 2.0, tm.frame_from, tm.frame_to)
    assert np.max(np.abs(tm.Q - ref)) / np.max(np.abs(ref)) < 1e-2


def test_robust_two_singularities():
    p = parse_problem("order=2; a0=x^2-1; domain=[-2,2]")
    tm = propagate_robust(p, -2.0, 2.0)
    dx = p.jump_half_width
    # segment by segment: smooth pieces through the closed form, jumps through their own dets
    s1, s2 = find_singularities(p)
    seg1 = propagate_ode(p, -2.0, s1.xi - dx, anchors=[s1.xi])
    j1 = singular_jump(p, s1, seg1.frame_to)
    seg2 = propagate_ode(p, s1.xi + dx, s2.xi - dx, start=j1.frame_to, anchors=[s1.xi, s2.xi])
    j2 = singular_jump(p, s2, seg2.frame_to)
    seg3 = propagate_ode(p, s2.xi + dx, 2.0, start=j2.frame_to, anchors=[s2.xi])
    want = np.prod([transfer_det_formula(p, s.frame_from, s.frame_to) for s in (seg1, seg2, seg3)])
    want *= j1.det * j2.det
    assert abs(tm.det - want) < 1e-3 * abs(want)
    chained = seg3.Q @ j2.Q @ seg2.Q @ j1.Q @ seg1.Q
    assert np.max(np.abs(chained - tm.Q)) < 1e-9 * np.max(np.abs(tm.Q))
    ref = oracle_transfer(p, -2.0, 2.0, tm.frame_from, tm.frame_to)
    assert np.max(np.abs(tm.Q - ref)) / np.max(np.abs(ref)) < 1e-2


def test_robust_inverse(airy):
    fwd = propagate_robust(airy, -2.0, 2.0)
    back = propagate_robust(airy, 2.0, -2.0, start=fwd.frame_to)
    # the jumps invert exactly; what remains is RK4 truncation on the graded smooth pieces
    assert np.max(np.abs(back.Q @ fwd.Q - np.eye(2))) < 1e-5
    (s,) = find_singularities(airy)
    j = singular_jump(airy, s)
    jb = singular_jump(airy, s, near=j.frame_to, direction=-1)
    assert np.max(np.abs(jb.Q @ j.Q - np.eye(2))) < 1e-12


def test_robust_exp_method(airy):
    tm_o = propagate_robust(airy, -2.0, 2.0, method="ode")
    tm_e = propagate_robust(airy, -2.0, 2.0, method="exp")
    assert abs(tm_e.det - tm_o.det) < 1e-6 * abs(tm_o.det)


def test_start_inside_band_is_rejected(airy):
    with pytest.raises(DegeneracyError):
        propagate_robust(airy, 5e-4, -2.0)


def test_close_singularities_are_rejected():
    p = parse_problem("order=2; a0=x^2-1e-7; domain=[-1,1]")
    assert len(find_singularities(p)) == 2
    with pytest.raises(DegeneracyError):
        propagate_robust(p, -1.0, 1.0)


def test_singularity_in_the_last_scan_cell(airy):
    # the turning point sits between the last two scan points of [-2, 5e-4]
    (s,) = find_singularities(airy, (-2.0, 5e-4))
    assert abs(s.xi) < 1e-12
