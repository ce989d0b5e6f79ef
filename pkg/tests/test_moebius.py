import itertools
import json
import math

import numpy as np
import pytest

from hdcop.empirical import EmpiricalCopula
from hdcop.errors import DimensionTooSmall
from hdcop.models import IndependenceCopula, ClaytonCopula
from hdcop.moebius import (
    PI4,
    bar_moebius_transform,
    diag_stat_all,
    eigen_expansion_check,
    eigenvalue_sum,
    gumbel_shift,
    kappa_squared,
    kernel_h,
    kernel_h_expansion,
    moebius_pvalue,
    moebius_test,
    moebius_transform,
    s_stat_integral,
    s_stat_rank,
    s_stat_rank_all,
    ubar_vbar,
    v_stat_all,
)
from hdcop.ranks import DataMatrix, PseudoObsMatrix, compute_ranks

RNG = np.random.default_rng(31337)


def _pseudo(values):
    return compute_ranks(DataMatrix(np.asarray(values, dtype=float)))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def test_moebius_of_independence_vanishes():
    pi = lambda u: float(np.prod(u))
    for I in [(0, 1), (1, 2), (0, 1, 2)]:
        for _ in range(10):
            u = RNG.uniform(size=3)
            assert moebius_transform(pi, I, u) == pytest.approx(0.0, abs=1e-14)
            assert bar_moebius_transform(pi, I, u) == pytest.approx(0.0, abs=1e-14)


def test_pair_transform_closed_form():
    ps = _pseudo(RNG.normal(size=(20, 3)))
    ec = EmpiricalCopula(ps)
    for _ in range(20):
        u = RNG.uniform(size=3)
        got = moebius_transform(ec.eval, (0, 2), u)
        want = ec.eval([u[0], 1.0, u[2]]) - ec.margin_eval(0, u[0]) * ec.margin_eval(2, u[2])
        assert got == pytest.approx(want, abs=1e-14)


def test_transform_gap_bound():
    # sup |M_I(Chat) - barM_I(Chat)| <= 2^{|I|} / n
    for n in (10, 25, 40):
        ps = _pseudo(RNG.normal(size=(n, 4)))
        ec = EmpiricalCopula(ps)
        for I in [(0, 1), (1, 3), (0, 1, 2), (0, 1, 2, 3)]:
            bound = 2.0 ** len(I) / n
            for _ in range(40):
                u = RNG.uniform(size=4)
                gap = abs(moebius_transform(ec.eval, I, u) - bar_moebius_transform(ec.eval, I, u))
                assert gap <= bound + 1e-12


def test_transform_needs_two_indices():
    with pytest.raises(ValueError):
        moebius_transform(lambda u: 1.0, (0,), np.array([0.5, 0.5]))


# ---------------------------------------------------------------------------
# pair statistic
# ---------------------------------------------------------------------------


def test_rank_formula_equals_exact_integral():
    for _ in range(120):
        n = int(RNG.integers(2, 41))
        ps = _pseudo(RNG.normal(size=(n, 2)))
        assert s_stat_rank(ps, (0, 1)) == pytest.approx(s_stat_integral(ps, (0, 1)), abs=1e-10)


def test_s_nonnegative_and_n1():
    from hdcop.moebius import _rank_factor

    single = _rank_factor(np.array([1]))
    assert float(np.sum(single * single)) == pytest.approx(0.0)
    for _ in range(30):
        n = int(RNG.integers(2, 30))
        ps = _pseudo(RNG.normal(size=(n, 2)))
        assert s_stat_rank(ps, (0, 1)) >= 0.0


def test_s_all_pairs_matches_per_pair():
    ps = _pseudo(RNG.normal(size=(30, 5)))
    s_all = s_stat_rank_all(ps)
    from itertools import combinations

    for p, pair in enumerate(combinations(range(5), 2)):
        assert s_all[p] == pytest.approx(s_stat_rank(ps, pair), abs=1e-12)


def test_exact_mean_via_permutation_enumeration():
    # E[S] = (n-1)(n+1)^2 / (36 n^3) under independence; enumerate n = 3
    n = 3
    perms = list(itertools.permutations(range(1, n + 1)))
    total = 0.0
    for p1 in perms:
        for p2 in perms:
            ranks = np.column_stack([p1, p2])
            ps = PseudoObsMatrix(uhat=ranks / n, ranks=ranks)
            total += s_stat_rank(ps, (0, 1))
    mean = total / len(perms) ** 2
    assert mean == pytest.approx((n - 1) * (n + 1) ** 2 / (36 * n**3), abs=1e-14)


def test_monte_carlo_mean_matches_exact_formula():
    n, reps = 40, 300
    model = IndependenceCopula(2)
    vals = []
    for rep in range(reps):
        sample = model.sample(n, np.random.SeedSequence(entropy=(1234, rep)))
        from hdcop.empirical import ranks_raw

        ranks = ranks_raw(sample)
        vals.append(s_stat_rank(PseudoObsMatrix(uhat=ranks / n, ranks=ranks), (0, 1)))
    vals = np.array(vals)
    want = (n - 1) * (n + 1) ** 2 / (36 * n**3)
    assert abs(vals.mean() - want) <= 4.0 * vals.std() / math.sqrt(reps)


# ---------------------------------------------------------------------------
# kernel and constants
# ---------------------------------------------------------------------------


def test_kernel_corner_values():
    assert kernel_h(np.zeros(2), np.zeros(2)) == pytest.approx(1.0 / 9.0)
    assert kernel_h(np.ones(2), np.ones(2)) == pytest.approx(1.0 / 9.0)


def test_kernel_degenerate():
    # E_v[h(u, V)] = 0 for every u: the kernel is degenerate
    v = RNG.uniform(size=(200000, 2))
    for _ in range(3):
        u = RNG.uniform(size=2)
        vals = kernel_h(np.broadcast_to(u, v.shape), v)
        assert abs(vals.mean()) < 4 * vals.std() / math.sqrt(len(v))


def test_eigen_expansion_convergence():
    assert eigen_expansion_check(L=200, lattice=20) <= 1e-3
    assert eigen_expansion_check(L=50, lattice=20) > eigen_expansion_check(L=400, lattice=20)


def test_kernel_expansion_pointwise():
    u = RNG.uniform(size=(5, 2))
    v = RNG.uniform(size=(5, 2))
    exact = kernel_h(u, v)
    approx = kernel_h_expansion(u, v, L=500)
    np.testing.assert_allclose(approx, exact, atol=5e-4)


def test_eigenvalue_head_and_sum():
    assert 1.0 / PI4 == pytest.approx(1.0 / math.pi**4)
    assert eigenvalue_sum(1000) == pytest.approx(1.0 / 36.0, abs=1e-6)
    # raw partial sum at L = 1000 is NOT within 1e-6; the tail closes the gap
    assert abs(eigenvalue_sum(1000, tail_correction=False) - 1.0 / 36.0) > 1e-5


def test_kappa_squared_value():
    # verified to 12 digits by high-precision evaluation of the defining
    # product (and of the eigenvalue-ratio double product)
    assert kappa_squared() == pytest.approx(6.0843962031, abs=1e-6)


def test_gumbel_shift_example():
    assert gumbel_shift(20) == pytest.approx(8.1799, abs=2e-4)
    with pytest.raises(DimensionTooSmall):
        gumbel_shift(2)


# ---------------------------------------------------------------------------
# rank-free split
# ---------------------------------------------------------------------------


def test_ubar_vbar_n1():
    u = RNG.uniform(size=(1, 2))
    u_part, v_part = ubar_vbar(u, (0, 1))
    assert u_part == 0.0
    assert v_part == pytest.approx(float(kernel_h(u[0], u[0])))


def test_ubar_vbar_sum_is_full_double_sum():
    u = RNG.uniform(size=(150, 3))
    u_part, v_part = ubar_vbar(u, (0, 2))
    pts = u[:, [0, 2]]
    direct = float(np.sum(kernel_h(pts[:, None, :], pts[None, :, :]))) / 150
    assert u_part + v_part == pytest.approx(direct, abs=1e-12)


def test_ubar_vbar_block_chunking():
    # block_rows smaller than n exercises the chunked accumulation
    u = RNG.uniform(size=(137, 2))
    whole = ubar_vbar(u, (0, 1), block_rows=1000)
    chunked = ubar_vbar(u, (0, 1), block_rows=16)
    assert chunked[0] == pytest.approx(whole[0], abs=1e-12)
    assert chunked[1] == pytest.approx(whole[1], abs=1e-12)


def test_diag_variance_constant():
    # Var(h(U,U)) = 11/32400 under independence (E h^2 = 1/900, E h = 1/36)
    u = IndependenceCopula(2).sample(2 * 10**6, seed=61)
    vals = kernel_h(u, u)
    assert vals.var() == pytest.approx(11.0 / 32400.0, rel=0.05)
    assert vals.mean() == pytest.approx(1.0 / 36.0, abs=4 * vals.std() / math.sqrt(len(vals)))


def test_v_stat_all_matches_ubar_vbar():
    u = RNG.uniform(size=(80, 4))
    v_all = v_stat_all(u)
    from itertools import combinations

    for p, pair in enumerate(combinations(range(4), 2)):
        assert v_all[p] == pytest.approx(ubar_vbar(u, pair)[1], abs=1e-12)


def test_diag_stat_is_rank_diagonal_part():
    ps = _pseudo(RNG.normal(size=(25, 3)))
    from hdcop.moebius import _rank_factor

    diag = diag_stat_all(ps)
    from itertools import combinations

    for p, (ell, m) in enumerate(combinations(range(3), 2)):
        a = np.diag(_rank_factor(ps.ranks[:, ell]))
        b = np.diag(_rank_factor(ps.ranks[:, m]))
        assert diag[p] == pytest.approx(float(np.sum(a * b)) / 25, abs=1e-12)


# ---------------------------------------------------------------------------
# the test itself
# ---------------------------------------------------------------------------


def test_moebius_pvalue_limits():
    assert moebius_pvalue(80.0) < 1e-8
    assert moebius_pvalue(-60.0) == pytest.approx(1.0)
    ys = np.linspace(-5, 15, 9)
    ps = [moebius_pvalue(y) for y in ys]
    assert all(a > b for a, b in zip(ps, ps[1:]))


def test_moebius_test_requires_d3():
    sample = IndependenceCopula(2).sample(50, seed=1)
    with pytest.raises(DimensionTooSmall):
        moebius_test(DataMatrix(sample))


def test_moebius_test_report():
    sample = IndependenceCopula(4).sample(120, seed=7)
    report = moebius_test(DataMatrix(sample), alpha=0.05)
    payload = json.loads(report.to_json())
    assert payload["schema"] == "hdcop/moebius_test/v1"
    assert payload["u_n"] == pytest.approx(gumbel_shift(4))
    assert payload["kappa_sq"] == pytest.approx(kappa_squared())
    assert 0.0 <= payload["p_value"] <= 1.0


def test_moebius_test_power():
    rejections = 0
    for seed in range(10):
        sample = ClaytonCopula(3.0, 3).sample(300, seed=seed)
        rejections += moebius_test(DataMatrix(sample), alpha=0.05).reject
    assert rejections == 10


def test_stat_table_csv():
    from hdcop.moebius import MoebiusStatTable

    ps = _pseudo(RNG.normal(size=(30, 3)))
    s = s_stat_rank_all(ps)
    from itertools import combinations

    table = MoebiusStatTable(n=30, d=3, pairs=list(combinations(range(3), 2)), s=s)
    text = table.to_csv()
    assert text.splitlines()[0] == "pair_i,pair_j,s"
    assert len(text.splitlines()) == 4
    assert table.max_stat == pytest.approx(float(np.max(s)))
