import itertools

import numpy as np
import pytest

from pcflow.chern import ChernPackage
from pcflow.field import HermitianMetric, TensorField, TorusChart
from pcflow.initial_data import (ConstructionError, DataSpec, HSState, make_flat,
                                 make_hermitian_symplectic, make_kahler_perturbation, make_metric,
                                 make_pluriclosed_rank_one, make_random_hermitian, mode_symbols,
                                 pluriclosed_symbol_residual, validate)

SPEC = DataSpec(epsilon=0.05).resolved(2)
SIGMA, TAU = mode_symbols(SPEC.k, SPEC.m)
B = np.asarray(SPEC.b)


def test_dataspec_validation():
    with pytest.raises(ValueError, match="unknown data kind"):
        DataSpec(kind="rank_one")
    with pytest.raises(ValueError, match="epsilon"):
        DataSpec(epsilon=0.0)
    with pytest.raises(ValueError, match="length 2"):
        DataSpec(b=(1, 2, 3)).resolved(2)
    r = DataSpec().resolved(3)
    assert len(r.k) == len(r.m) == len(r.b) == 3


def test_flat(chart):
    rep = validate(make_flat(chart))
    assert rep.passed
    assert rep.pluriclosed_residual == 0 and rep.max_torsion_sq == 0
    assert rep.min_eig == rep.max_eig == 1.0


def test_symbol_identity_for_every_quadruple():
    ghat = np.outer(B, TAU)
    for i, j, p, q in itertools.product(range(2), repeat=4):
        term = (SIGMA[i] * TAU[j] * ghat[p, q] - SIGMA[p] * TAU[j] * ghat[i, q]
                - SIGMA[i] * TAU[q] * ghat[p, j] + SIGMA[p] * TAU[q] * ghat[i, j])
        assert abs(term) < 1e-12
    assert pluriclosed_symbol_residual(SIGMA, TAU, ghat) < 1e-12
    # a generic rank-one mode is not pluriclosed
    assert pluriclosed_symbol_residual(SIGMA, TAU, np.outer(B, np.conj(B))) > 1


def test_rank_one_is_pluriclosed_and_torsion_bearing(rank_one):
    rep = validate(rank_one)
    assert rep.passed
    assert rep.pluriclosed_residual < 1e-9
    assert rep.max_torsion_sq > 1e-4
    assert rep.hermitian_residual == 0


def test_random_data_is_not_pluriclosed(chart):
    rep = validate(make_random_hermitian(chart, DataSpec(kind="random_hermitian", epsilon=0.1)))
    assert rep.pluriclosed_residual > 1e-3
    assert not rep.passed


def test_torsion_square_scales_quadratically():
    chart = TorusChart(2, 8)
    sq = [validate(make_pluriclosed_rank_one(chart, DataSpec(epsilon=e))).max_torsion_sq
          for e in (0.02, 0.04)]
    assert sq[1] / sq[0] == pytest.approx(4.0, rel=0.2)


def test_kahler_branch_is_torsion_free():
    a = np.array([0.3 - 1j, 2.0 + 0.5j])
    ghat = np.outer(SIGMA, a)
    that = np.einsum("i,jk->ijk", SIGMA, ghat) - np.einsum("j,ik->ijk", SIGMA, ghat)
    assert np.max(np.abs(that)) < 1e-12
    # assembled: a = τ makes the mode plus its conjugate a ∂∂̄ of a real potential
    chart = TorusChart(2, 8)
    wave = chart.mode(SPEC.k, SPEC.m)
    pert = np.multiply.outer(np.outer(SIGMA, TAU), wave)
    pert = pert + np.conj(np.swapaxes(pert, 0, 1))
    eye = make_flat(chart).g.data
    pkg = ChernPackage(HermitianMetric(TensorField(chart, eye + 0.01 * pert, "ub")))
    assert np.max(np.abs(pkg.torsion.data)) < 1e-9


def test_parallel_vector_rejected(chart):
    with pytest.raises(ConstructionError, match="parallel"):
        make_pluriclosed_rank_one(chart, DataSpec(b=tuple(SIGMA / np.pi)))
    with pytest.raises(ConstructionError, match="nonzero"):
        make_pluriclosed_rank_one(chart, DataSpec(k=(0, 0), m=(0, 0)))
    with pytest.raises(ConstructionError, match="dimension"):
        make_pluriclosed_rank_one(TorusChart(1, 8))


def test_positivity_failure_reports_max_epsilon(chart):
    with pytest.raises(ConstructionError) as info:
        make_pluriclosed_rank_one(chart, DataSpec(epsilon=5.0))
    err = info.value
    assert err.min_eig < 0
    assert 0 < err.max_epsilon < 5.0
    # just under the reported bound the metric is accepted
    make_pluriclosed_rank_one(chart, DataSpec(epsilon=0.95 * err.max_epsilon))


def test_kahler_perturbation(chart):
    metric = make_kahler_perturbation(chart, [(0.05, (1, 0), (0, 0))])
    pkg = ChernPackage(metric)
    rep = validate(metric)
    assert np.max(np.abs(pkg.torsion.data)) < 1e-10
    assert rep.pluriclosed_residual < 1e-9
    assert np.max(np.abs(pkg.s_trace.data - pkg.ric_trace.data)) < 1e-8
    with pytest.raises(ConstructionError) as info:
        make_kahler_perturbation(chart, [(1.0, (1, 0), (0, 0))])
    assert info.value.min_eig < 0


def test_hermitian_symplectic_pair(hs_pair):
    phi = hs_pair.phi.data
    assert np.array_equal(phi, -np.swapaxes(phi, 0, 1))
    # ∂φ = 0 at symbol level: the three cyclic terms cancel
    phat = -(np.outer(SIGMA, B) - np.outer(B, SIGMA))
    cyc = (np.einsum("k,ij->ijk", SIGMA, phat) + np.einsum("i,jk->ijk", SIGMA, phat)
           + np.einsum("j,ki->ijk", SIGMA, phat))
    assert np.max(np.abs(cyc)) < 1e-12


def test_hs_compatibility_small_epsilon():
    chart = TorusChart(2, 8)
    rep = validate(make_hermitian_symplectic(chart, DataSpec(kind="hermitian_symplectic",
                                                             epsilon=0.02)))
    assert rep.hs_residual < 1e-6
    assert rep.passed


def test_hs_phi_vanishes_when_b_parallel():
    phat = np.outer(SIGMA, SIGMA) - np.outer(SIGMA, SIGMA)
    assert np.all(phat == 0)
    chart = TorusChart(2, 8)
    with pytest.raises(ConstructionError, match="parallel"):
        make_hermitian_symplectic(chart, DataSpec(kind="hermitian_symplectic",
                                                  b=tuple(2 * SIGMA)))


def test_hsstate_validates_phi(rank_one):
    chart = rank_one.chart
    with pytest.raises(ValueError, match="antisymmetric"):
        HSState(rank_one, TensorField(chart, np.ones((2, 2) + chart.shape, complex), "uu"))
    with pytest.raises(ValueError, match="slots"):
        HSState(rank_one, TensorField.zeros(chart, "ub"))


@pytest.mark.parametrize("kind", ["flat", "kahler", "pluriclosed_rank_one",
                                  "hermitian_symplectic", "random_hermitian"])
def test_make_metric_dispatch(kind):
    data = make_metric(TorusChart(2, 4), DataSpec(kind=kind, epsilon=0.05))
    assert isinstance(data, HSState) == (kind == "hermitian_symplectic")
