import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relupath.complexity import (
    IDENTITY,
    MAX_EXACT_N,
    RELU,
    EnumerationTooLargeError,
    FinitePointSet,
    PerturbationLaw,
    PsiSpec,
    UnsupportedExactError,
    clip_contraction,
    contraction_check,
    empirical_class_complexity,
    exact_moment,
    iterate_layer_op,
    layer_op,
    massart_bound,
    mc_moment,
    mu_complexity_exact,
    mu_complexity_mc,
    relu_class_complexity_bound,
    square_contraction,
)
from relupath.network import canonicalize, general_from_layers
from relupath.variation import random_normalized_net

RAD = PerturbationLaw.rademacher()
ID = PsiSpec.identity()


def brute_complexity(points, psi=ID, positive=True):
    """Direct loop over all sign patterns."""
    pts = np.asarray(points, dtype=float)
    vals = []
    for signs in itertools.product([-1.0, 1.0], repeat=pts.shape[1]):
        s = max(float(np.dot(signs, p)) for p in pts)
        vals.append(max(s, 0.0) if positive else s)
    vals = np.array(vals)
    if psi.kind == "identity":
        return vals.mean()
    return math.log(np.mean(np.exp(psi.lam * vals))) / psi.lam


def test_abs_sum_example(backend):
    assert mu_complexity_exact(FinitePointSet([[1, 1], [-1, -1]]), RAD, ID) == 1.0


def test_zero_set():
    assert mu_complexity_exact(FinitePointSet([[0.0, 0.0, 0.0]])) == 0.0
    est = mu_complexity_mc(FinitePointSet([[0.0, 0.0]]), PerturbationLaw.gaussian(), ID, 1000, 3)
    assert est.estimate == 0.0 and est.std_error == 0.0


def test_single_coordinate_magnitude():
    assert mu_complexity_exact(FinitePointSet([[1, 0], [-1, 0]])) == 1.0


@pytest.mark.parametrize("psi", [PsiSpec.identity(), PsiSpec.exponential(0.7)])
def test_exact_matches_bruteforce(rng, backend, psi):
    for n in (1, 2, 5, 9):
        pts = rng.normal(size=(4, n))
        assert mu_complexity_exact(FinitePointSet(pts), RAD, psi) == pytest.approx(
            brute_complexity(pts, psi), rel=1e-12
        )


def test_exact_refusals():
    with pytest.raises(EnumerationTooLargeError):
        mu_complexity_exact(FinitePointSet(np.ones((1, MAX_EXACT_N + 1))))
    with pytest.raises(UnsupportedExactError):
        mu_complexity_exact(FinitePointSet([[1.0]]), PerturbationLaw.gaussian())


def test_gaussian_mc_closed_form():
    est = mu_complexity_mc(FinitePointSet([[1, 0], [-1, 0]]), PerturbationLaw.gaussian(1.0), ID, 10**6, 11)
    assert abs(est.estimate - math.sqrt(2 / math.pi)) <= 3 * est.std_error
    assert not est.exact and not est.jensen_biased


def test_mc_vs_exact(rng):
    for _ in range(5):
        A = FinitePointSet(rng.normal(size=(6, 12)))
        est = mu_complexity_mc(A, RAD, ID, 20_000, int(rng.integers(1 << 30)))
        assert abs(est.estimate - mu_complexity_exact(A)) <= 4 * est.std_error


def test_mc_exponential_flags_bias(rng):
    A = FinitePointSet(rng.normal(size=(3, 6)))
    est = mu_complexity_mc(A, RAD, PsiSpec.exponential(0.5), 5000, 0)
    assert est.jensen_biased


def test_mc_thread_independence(rng):
    A = FinitePointSet(rng.normal(size=(5, 30)))
    one = mc_moment(A, RAD, ID, 20_000, 5, threads=1)
    four = mc_moment(A, RAD, ID, 20_000, 5, threads=4)
    assert one == four


def test_mc_replicate_floor():
    with pytest.raises(ValueError):
        mu_complexity_mc(FinitePointSet([[1.0]]), RAD, ID, 99, 0)


def test_layer_op_examples():
    out = layer_op(FinitePointSet([[1.0, -1.0]]), RELU)
    assert out.symmetric
    assert {tuple(p) for p in out.points} == {(1.0, 0.0), (-1.0, 0.0)}
    zero = layer_op(FinitePointSet([[0.0, 0.0]]), RELU)
    np.testing.assert_array_equal(zero.points, [[0.0, 0.0]])


def test_layer_op_set_sizes(rng):
    d, n = 3, 7
    X = rng.uniform(-1, 1, size=(n, d))
    A = FinitePointSet(np.vstack([X.T, -X.T]))  # the 2d doubled-input coordinates
    sizes = [len(s) for s in iterate_layer_op(A, 4, RELU)]
    assert sizes == [2 * d, 4 * d, 4 * d, 4 * d, 4 * d]


def test_symmetric_flag_validated():
    with pytest.raises(ValueError):
        FinitePointSet([[1.0, 2.0]], symmetric=True)
    assert FinitePointSet.symmetrized([[1.0, 2.0]]).symmetric


def test_identity_contraction_equal(rng):
    rep = contraction_check(FinitePointSet(rng.normal(size=(4, 6))), IDENTITY)
    assert rep.m_phi == rep.m_base and rep.passed


def test_relu_contraction_small():
    rep = contraction_check(FinitePointSet([[2.0, -1.0], [-2.0, 1.0]]), RELU)
    assert rep.exact and rep.phi_ok
    assert rep.m_phi.value <= rep.m_base.value


def test_exponential_contraction(rng):
    psi = PsiSpec.exponential(0.5)
    for phi in (RELU, clip_contraction(1.0)):
        rep = contraction_check(FinitePointSet(rng.normal(size=(5, 8))), phi, RAD, psi, seed=1)
        assert rep.passed and rep.scale == "log"


def test_contraction_mc_gaussian(rng):
    rep = contraction_check(
        FinitePointSet(rng.normal(size=(4, 30))), RELU, PerturbationLaw.gaussian(), ID, replicates=5000, seed=2
    )
    assert not rep.exact and rep.passed


def test_positive_part_droppable_for_symmetric(rng, backend):
    A = FinitePointSet.symmetrized(rng.normal(size=(4, 9)))
    a = exact_moment(A, RAD, ID, positive_part=True)
    b = exact_moment(A, RAD, ID, positive_part=False)
    assert a.value == b.value


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.05, 5.0))
def test_jensen_ordering(seed, lam):
    rng = np.random.default_rng(seed)
    A = FinitePointSet(rng.normal(size=(int(rng.integers(1, 6)), int(rng.integers(1, 10)))))
    ident = mu_complexity_exact(A, RAD, ID)
    expo = mu_complexity_exact(A, RAD, PsiSpec.exponential(lam))
    assert ident <= expo * (1 + 1e-12) + 1e-15


@pytest.mark.parametrize("L", [1, 2, 3])
def test_multilayer_contraction(rng, L):
    lam = 0.5
    for _ in range(10):
        A = FinitePointSet(rng.normal(size=(4, 8)))
        chain = iterate_layer_op(A, L, RELU)
        m0 = exact_moment(chain[0], RAD, ID).value
        mL = exact_moment(chain[-1], RAD, ID).value
        assert mL <= 2**L * m0 * (1 + 1e-12)
        c0 = mu_complexity_exact(chain[0], RAD, PsiSpec.exponential(lam))
        cL = mu_complexity_exact(chain[-1], RAD, PsiSpec.exponential(lam))
        assert cL <= L * math.log(2) / lam + c0 + 1e-12


def test_square_contraction(rng):
    B = 1.0
    diffs = rng.uniform(-2 * B, 2 * B, size=(6, 10))
    sq = square_contraction(B)
    np.testing.assert_allclose(sq(diffs), diffs**2 / (4 * B))
    lhs = mu_complexity_exact(FinitePointSet(diffs**2), RAD, ID)
    rhs = 4 * B * mu_complexity_exact(FinitePointSet(diffs), RAD, ID)
    assert lhs <= rhs * (1 + 1e-12)


def test_class_bound_examples():
    b = relu_class_complexity_bound(1.0, 1, 1, 4)
    assert b.bound == pytest.approx(math.sqrt(8 * (math.log(2) + math.log(2))), rel=1e-15)
    assert b.bound == pytest.approx(3.3303, abs=1e-4)  # 4-decimal rounding of 3.33022
    assert relu_class_complexity_bound(0.0, 3, 2, 10).bound == 0.0
    assert relu_class_complexity_bound(2.0, 2, 3, 10).bound == 2 * relu_class_complexity_bound(1.0, 2, 3, 10).bound
    g = relu_class_complexity_bound(1.0, 2, 3, 10, PerturbationLaw.gaussian(2.5))
    assert g.bound == pytest.approx(2.5 * relu_class_complexity_bound(1.0, 2, 3, 10).bound, rel=1e-15)
    lam = math.sqrt(2 * math.log(2**2 * 2 * 3) / 10)
    assert relu_class_complexity_bound(1.0, 2, 3, 10).lambda_opt == pytest.approx(lam, rel=1e-14)


def test_massart_bound_dominates(rng):
    for _ in range(10):
        A = FinitePointSet(rng.normal(size=(int(rng.integers(1, 9)), 10)))
        assert mu_complexity_exact(A) <= massart_bound(A).bound


def test_empirical_zero_net():
    zero = canonicalize(general_from_layers(2, [([[0.0, 0.0]], [0.0])]))
    X = np.zeros((4, 2))
    assert empirical_class_complexity([zero], X).estimate == 0.0


def test_empirical_family_example(rng):
    nets = [random_normalized_net(2, 2, 4, rng, V=1.0).to_canonical() for _ in range(50)]
    X = rng.uniform(-1, 1, size=(16, 2))
    res = empirical_class_complexity(nets, X, RAD, ID, V_cap=1.0)
    assert res.exact
    assert res.estimate <= math.sqrt(2 * 16 * (2 * math.log(2) + math.log(4)))
    assert res.estimate <= res.bound
    bigger = empirical_class_complexity(
        nets + [random_normalized_net(2, 2, 4, rng, V=1.0).to_canonical()], X, RAD, ID, V_cap=1.0
    )
    assert bigger.estimate >= res.estimate


def test_empirical_rejects_over_cap(rng):
    nets = [random_normalized_net(2, 2, 3, rng, V=2.0).to_canonical()]
    with pytest.raises(ValueError):
        empirical_class_complexity(nets, np.zeros((3, 2)), V_cap=1.0)
