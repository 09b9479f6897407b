import math

import numpy as np
import pytest

from xxz_tba.errors import DomainError
from xxz_tba.qtm import (FusionEvaluator, TrotterParams, bae_residual, locate_zeros, log_t, phi, q_function,
                         sample_points, solve_bae, t_eigenvalue, verify_inversion, verify_periodicity,
                         verify_t_system, verify_y_system, write_zero_map)
from xxz_tba.rational_ts import sequences_for


@pytest.fixture(scope="module")
def bs5():
    return solve_bae(TrotterParams.from_p0("5", 8, -0.05), rank=1)


@pytest.fixture(scope="module")
def bs245():
    return solve_bae(TrotterParams.from_p0("24/5", 8, -0.05), rank=1)


def test_phi_closed_forms():
    tp = TrotterParams(2, -0.01, math.pi / 5)
    assert abs(phi(1.0, tp) - math.sinh(math.pi / 10) / math.sin(math.pi / 5)) < 1e-15
    tp8 = TrotterParams(8, -0.01, math.pi / 5)
    assert phi(0.0, tp8) == 0
    v = np.array([0.3 + 0.2j, -1.1 + 0.7j])
    shifted = phi(v + 2j * 5, tp8)
    assert np.allclose(shifted, (-1) ** 4 * phi(v, tp8), rtol=1e-12)


def test_trotter_params_checks():
    with pytest.raises(DomainError):
        TrotterParams(7, -0.01, 0.5)
    with pytest.warns(UserWarning):
        TrotterParams(8, 0.8, 0.5)
    tp = TrotterParams.from_physical("5", 2.0, 1.0, 10)
    assert math.isclose(tp.u, -2.0 * math.sin(math.pi / 5) / (math.pi / 5 * 10))


def test_empty_sector():
    bs = solve_bae(TrotterParams.from_p0("5", 8, -0.05), m=0)
    assert bs.m == 0 and bae_residual(bs).size == 0
    assert np.all(q_function(np.array([0.3, 1j]), bs) == 1)


def test_single_root_closed_form():
    # N = 2, m = 1: the equation is symmetric under w -> -w and is solved by w = 0
    bs = solve_bae(TrotterParams.from_p0("5", 2, -0.01), m=1)
    assert abs(bs.roots[0]) < 1e-12
    assert np.max(np.abs(bae_residual(bs))) < 1e-12


def test_ground_roots_real_and_converged():
    bs = solve_bae(TrotterParams.from_p0("24/5", 16, -0.01), rank=1)
    assert bs.m == 8
    assert np.max(np.abs(bs.roots.imag)) == 0
    assert np.max(np.abs(bae_residual(bs))) < 1e-12


@pytest.mark.parametrize("rank, m", [(1, 6), (2, 5), (3, 6)])
def test_rank_sectors(rank, m):
    bs = solve_bae(TrotterParams.from_p0("5", 12, -0.05), rank=rank)
    assert bs.m == m and bs.rank == rank
    assert np.max(np.abs(bae_residual(bs))) < 1e-12
    if rank == 3:
        assert 0j in bs.roots and 5j in bs.roots


def test_q_zero_and_quasi_periodicity(bs245):
    ts = sequences_for("24/5")
    a = ts.alpha
    assert abs(q_function(bs245.roots[0], bs245)) < 1e-14
    v = sample_points(4.8, 5, seed=2)
    lhs = q_function(v + 2j * ts.y[a], bs245)
    sign = (-1) ** (bs245.m * ts.z[a])
    assert np.allclose(lhs, sign * q_function(v, bs245), rtol=1e-10)


def test_t0_and_t_minus_one(bs5):
    tp = bs5.tp
    v = np.array([0.4 + 0.3j, -1.0 + 0.1j])
    t0 = t_eigenvalue(0, v, bs5)
    assert np.allclose(t0, phi(v - 1j * (tp.u + 1), tp) * phi(v + 1j * (tp.u + 1), tp), rtol=1e-12)
    assert np.all(t_eigenvalue(-1, v, bs5) == 0)


def test_largest_eigenvalue_tends_to_two():
    vals = []
    for u in (-1e-3, -1e-4, -1e-5):
        bs = solve_bae(TrotterParams.from_p0("5", 8, u), rank=1)
        vals.append(t_eigenvalue(1, 0.0, bs)[0].real)
    assert abs(vals[-1] - 2) < 1e-3
    assert abs(vals[-1] - 2) < abs(vals[0] - 2)


def test_alpha_one_reduction(bs5):
    v = sample_points(5.0, 8, seed=4)
    lhs = t_eigenvalue(5, v, bs5)
    rhs = t_eigenvalue(3, v, bs5) + 2 * (-1) ** bs5.m * t_eigenvalue(0, v + 5j, bs5)
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) < 1e-9


@pytest.mark.parametrize("p0", ["5", "24/5"])
def test_functional_relation_suites(p0):
    bs = solve_bae(TrotterParams.from_p0(p0, 8, -0.05), rank=1)
    for rep in (verify_t_system(bs, samples=20), verify_y_system(bs), verify_inversion(bs), verify_periodicity(bs)):
        assert rep.passed, rep.format()
    names = verify_y_system(bs).names()
    assert {"ysystem1", "ysystem2", "ysystem3", "ysystem4"} <= set(names)
    if p0 == "5":
        assert {"ysystemc1", "ysystemc2", "ysystemc3"} <= set(names)


def test_inversion_n16():
    bs = solve_bae(TrotterParams.from_p0("24/5", 16, -0.05), rank=1)
    assert verify_inversion(bs).passed


@pytest.mark.parametrize("rank", [2, 3])
def test_excited_suites(rank):
    bs = solve_bae(TrotterParams.from_p0("5", 12, -0.05), rank=rank)
    for rep in (verify_t_system(bs), verify_y_system(bs), verify_inversion(bs)):
        assert rep.passed, rep.format()


def test_y_equivalence_and_conventions(bs245):
    ev = FusionEvaluator(bs245)
    v = sample_points(4.8, 6, seed=5)
    for j in range(1, sequences_for("24/5").j_max + 1):
        a = np.log1p(np.exp(ev.log_y(j, v)))
        b = ev.log_one_plus_y(j, v)
        assert np.max(np.abs(np.expm1(a - b))) < 1e-9
    assert np.all(ev.y(0, v) == 0)
    assert np.all(ev.one_plus_y(0, v) == 1)


def test_integer_k_relation(bs5):
    ev = FusionEvaluator(bs5)
    v = sample_points(5.0, 6, seed=6)
    lhs = ev.log_k_int(v + 1j) + ev.log_k_int(v - 1j)
    rhs = ev.log_one_plus_y_int(3, v)
    assert np.max(np.abs(np.expm1(lhs - rhs))) < 1e-9


def _off_line(z, n, p0):
    return min(abs((z.imag - s * n + p0) % (2 * p0) - p0) for s in (1, -1))


@pytest.mark.parametrize("u", [0.01, -0.01])
def test_zeros_near_lines(u):
    bs = solve_bae(TrotterParams.from_p0("24/5", 16, u), rank=1)
    for n in range(2, 6):
        zs = locate_zeros(n, bs)
        assert sum(z.multiplicity for z in zs) == 16
        assert max(_off_line(z.v, n, 4.8) for z in zs) < 0.05


def test_real_zero_pattern_rank2_and_rank3(tmp_path):
    for k in (2, 3):
        bs = solve_bae(TrotterParams.from_p0("5", 20, -0.1), rank=k)
        for n in range(2, 6):
            real = [z for z in locate_zeros(n, bs) if abs(z.v.imag) < 1e-6]
            if n <= 4:
                assert len(real) == 2 and abs(real[0].v + real[1].v) < 1e-8
            elif k == 2:
                assert real == []
            else:
                assert len(real) == 1 and real[0].multiplicity == 2 and abs(real[0].v) < 1e-6
    path = tmp_path / "zeros.csv"
    write_zero_map(path, locate_zeros(2, bs))
    lines = path.read_text().splitlines()
    assert lines[0] == "#schema=1" and lines[1] == "n,re_v,im_v,multiplicity"


def test_periodicity(bs245):
    v = sample_points(4.8, 5, seed=7)
    for n in range(0, 6):
        a, b = log_t(n, v, bs245), log_t(n, v + 2j * 4.8, bs245)
        assert np.max(np.abs(np.expm1(a - b))) < 1e-10
