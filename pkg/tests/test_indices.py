import math

import numpy as np
import pytest

from kgbandits.errors import ConfigError, DomainError
from kgbandits.families import ArmBelief, bernoulli, exponential, gaussian
from kgbandits.indices import (
    StoppingQuery,
    bernoulli_kgi_root,
    gaussian_gi_bonus,
    gibl_index,
    gicg_index,
    gittins_index,
    kg_stopping_value,
    kgi_closed_form_bernoulli,
    kgi_discrepancy_report,
    kgi_index,
    kgi_index_arr,
    normal_moment_args,
)
from kgbandits.tables import (
    bernoulli_gi_lookup,
    build_bernoulli_gi_table,
    build_gaussian_bonus_table,
    gaussian_bonus_lookup,
    load_index_table,
    save_index_table,
)

BERN = bernoulli()


def test_stopping_value_retires_for_large_charge():
    q = StoppingQuery(ArmBelief(1, 2), BERN, gamma=0.5, t=math.inf, lam=50.0)
    assert kg_stopping_value(q) == 0.0


def test_stopping_value_root_at_five_ninths():
    # hand solve: 1/2 - lam + (1/2)(2/3 - lam) = 0  =>  lam = 5/9
    q = StoppingQuery(ArmBelief(1, 2), BERN, gamma=0.5, t=math.inf, lam=5 / 9)
    assert kg_stopping_value(q) == pytest.approx(0.0, abs=1e-15)
    q2 = StoppingQuery(ArmBelief(1, 2), BERN, gamma=0.5, t=math.inf, lam=5 / 9 - 1e-6)
    assert kg_stopping_value(q2) > 0.0


def test_stopping_value_at_mean_charge():
    q = StoppingQuery(ArmBelief(1, 2), BERN, gamma=0.5, t=math.inf, lam=0.5)
    # V = H * excess(mean) = (1/2)(2/3-1/2) = 1/12
    assert kg_stopping_value(q) == pytest.approx(1 / 12, abs=1e-15)


def test_kgi_index_bernoulli_hand_root():
    got = kgi_index(ArmBelief(1, 2), BERN, gamma=0.5)
    assert got == pytest.approx(5 / 9, abs=1e-8)
    assert bernoulli_kgi_root(1, 2, 1.0) == pytest.approx(5 / 9, rel=1e-15)


def test_kgi_index_no_learning_horizon():
    assert kgi_index(ArmBelief(1, 2), BERN, gamma=0.9, t=1) == 0.5
    assert kgi_index(ArmBelief(2, 3), exponential(), gamma=0.9, t=1) == pytest.approx(2 / 3)


def test_kgi_monotone_in_horizon():
    fam = BERN
    prev = 0.0
    for t in [2, 3, 5, 10, 40, math.inf]:
        v = kgi_index(ArmBelief(1, 3), fam, gamma=0.9, t=t)
        assert v >= prev - 1e-12
        prev = v
    assert kgi_index(ArmBelief(1, 3), fam, gamma=0.9, t=2000) == pytest.approx(
        kgi_index(ArmBelief(1, 3), fam, gamma=0.9, t=math.inf), abs=1e-9
    )


def test_kgi_bisection_matches_analytic_root_grid():
    fam = BERN
    for gamma in (0.5, 0.9, 0.99):
        H = gamma / (1 - gamma)
        n = np.arange(2, 26)
        S, N = [], []
        for m in n:
            S.extend(range(1, m))
            N.extend([m] * (m - 1))
        S, N = np.array(S, float), np.array(N, float)
        got = kgi_index_arr(S, N, H, fam)
        want = bernoulli_kgi_root(S, N, H)
        assert np.abs(got - want).max() < 1e-8


def test_kgi_exponential_and_gaussian_roots_verify():
    # the returned index must zero the stopping value and bracket from above
    for fam, belief in [
        (exponential(), ArmBelief(2, 3)),
        (gaussian(tau=2.0), ArmBelief(1, 2)),
    ]:
        lam = kgi_index(belief, fam, gamma=0.9)
        q = StoppingQuery(belief, fam, 0.9, math.inf, lam)
        assert abs(kg_stopping_value(q)) < 1e-8
        q_lo = StoppingQuery(belief, fam, 0.9, math.inf, lam - 1e-6)
        assert kg_stopping_value(q_lo) > 0.0
        assert lam > belief.mean


def test_closed_form_bernoulli_collapses_at_h_zero():
    assert kgi_closed_form_bernoulli(1, 2, gamma=0.9, t=1) == 0.5


def test_closed_form_bernoulli_disagrees_with_root():
    cf = kgi_closed_form_bernoulli(1, 2, gamma=0.5)
    assert cf == pytest.approx(1 / 2 + 2 / 9, rel=1e-12)
    bis = kgi_index(ArmBelief(1, 2), BERN, gamma=0.5)
    assert cf - bis > 0.16  # the discrepancy must be detected, not hidden


def test_closed_form_large_n_limit():
    # the bisection index approaches the mean for symmetric beliefs as n
    # grows; the closed-form candidate instead tends to mean + H/(4+2H),
    # one more symptom of its failure to solve the defining equation
    for n in (10, 100, 1000):
        cf = kgi_closed_form_bernoulli(n / 2, n, gamma=0.5)
        bis = float(kgi_index_arr(n / 2, n, 1.0, BERN))
        assert abs(bis - 0.5) < 2.5 / n
        assert abs(cf - (0.5 + 1.0 / 6.0)) < 2.5 / n


def test_discrepancy_report_contents():
    report = kgi_discrepancy_report(n_max=6)
    assert "0.722222" in report and "0.555556" in report
    assert "max |difference|" in report


# -- exact Gittins -----------------------------------------------------------


def test_gittins_bernoulli_small_gamma_is_mean():
    got = gittins_index(ArmBelief(1, 2), BERN, gamma=1e-4)
    assert got == pytest.approx(0.5, abs=1e-3)
    assert got >= 0.5


def test_gittins_bernoulli_monotone_in_gamma_and_bounded():
    prev = 0.5
    for gamma in (0.3, 0.5, 0.7, 0.9):
        v = gittins_index(ArmBelief(1, 2), BERN, gamma=gamma)
        assert prev - 1e-9 <= v < 1.0
        prev = v


def test_gittins_bernoulli_theorem1_monotonicity():
    g = 0.9
    vals = [gittins_index(ArmBelief(c * 1.0, c * 2.0), BERN, g) for c in (1, 2, 3)]
    assert vals[0] >= vals[1] - 1e-9 >= vals[2] - 2e-9
    sig = [gittins_index(ArmBelief(s, 5.0), BERN, g) for s in (1.0, 2.0, 3.0)]
    assert sig[0] < sig[1] < sig[2]


def test_gittins_matches_kgi_at_small_gamma():
    # both indices agree to O(gamma^2): a cross-implementation oracle
    for fam, belief in [
        (BERN, ArmBelief(1, 3)),
        (exponential(), ArmBelief(2, 3)),
        (gaussian(tau=1.0), ArmBelief(0, 1)),
    ]:
        gi = gittins_index(belief, fam, gamma=0.05)
        kg = kgi_index(belief, fam, gamma=0.05)
        assert gi == pytest.approx(kg, abs=2e-4)
        assert gi >= belief.mean


def test_gittins_gaussian_tau_standardisation():
    # index(total, n, tau) = mean + l(n/tau)/sqrt(tau)
    g = 0.9
    bonus = gaussian_gi_bonus(1.0, g)
    got = gittins_index(ArmBelief(0, 2), gaussian(tau=2.0), g)
    assert got == pytest.approx(bonus / math.sqrt(2.0), abs=1e-6)
    assert bonus > 0


def test_gaussian_bonus_decreasing_in_n():
    g = 0.9
    b = [gaussian_gi_bonus(n, g) for n in (1.0, 2.0, 4.0, 8.0)]
    assert all(x > y for x, y in zip(b, b[1:]))
    assert b[-1] > 0


def test_gittins_exponential_consistency():
    fam = exponential()
    belief = ArmBelief(2, 3)
    lam = gittins_index(belief, fam, gamma=0.5, tol=1e-6)
    assert lam > belief.mean
    from kgbandits.indices import _exponential_gi_value, _truncation_depth

    depth = _truncation_depth(0.5, math.inf, 1e-7, 1.0)
    assert abs(_exponential_gi_value(2.0, 3.0, 0.5, depth, lam)) < 1e-5
    assert _exponential_gi_value(2.0, 3.0, 0.5, depth, lam - 1e-4) > 0

    # index-level self-convergence: a refined grid moves the calibrated
    # index by < 1e-4 relative
    def calibrate(grid_size, gl_nodes):
        lo, hi = 2.0 / 3.0, 2.0
        while hi - lo > 1e-9:
            mid = 0.5 * (lo + hi)
            val = _exponential_gi_value(
                2.0, 3.0, 0.5, depth, mid, grid_size=grid_size, gl_nodes=gl_nodes
            )
            lo, hi = (mid, hi) if val > 0 else (lo, mid)
        return 0.5 * (lo + hi)

    coarse = calibrate(480, 64)
    fine = calibrate(960, 96)
    assert abs(coarse - fine) / fine < 1e-4


# -- analytic approximations -------------------------------------------------


def test_gibl_hand_computed_point():
    # gamma=0.9, tau=1, n=1: s = -1/ln(0.9) = 9.4912 -> psi = 0.77 - 0.58/sqrt(s)
    s = -1.0 / math.log(0.9)
    want = 0.2 + (0.77 - 0.58 / math.sqrt(s))
    assert gibl_index(0.2, 1.0, 1.0, 0.9) == pytest.approx(want, rel=1e-12)


def test_gibl_bonus_vanishes_for_large_n():
    assert gibl_index(0.3, 1e9, 1.0, 0.95) == pytest.approx(0.3, abs=1e-4)
    assert gicg_index(0.3, 1e9, 1.0, 0.95) == pytest.approx(0.3, abs=1e-4)


def test_gibl_bonus_decreasing_in_n():
    # the published piecewise table has tiny jumps at its seams, so strict
    # monotonicity is checked inside each branch segment of s = tau*c/n
    c = -1.0 / math.log(0.95)
    seams = [c / 15.0, c / 5.0, c / 1.0, c / 0.2]
    edges = [1.0] + [x for x in seams if x > 1.0] + [200.0]
    for a, b in zip(edges, edges[1:]):
        n = np.linspace(a * 1.01, b * 0.99, 40)
        vals = gibl_index(0.0, n, 1.0, 0.95)
        assert (np.diff(vals) < 0).all()
    full = gibl_index(0.0, np.linspace(1.0, 200.0, 200), 1.0, 0.95)
    assert full[0] > full[-1]


def test_gibl_piecewise_kink_in_gamma():
    # crossing the s=15 boundary produces a jump in the bonus as a function
    # of gamma: the fingerprint of the piecewise index
    n = 3.0
    gammas = np.linspace(0.95, 0.99, 400)
    vals = np.array([gibl_index(0.0, n, 1.0, g) for g in gammas])
    steps = np.diff(vals)
    assert steps.max() > 10 * np.median(np.abs(steps))


def test_gicg_differs_from_gibl():
    assert abs(gicg_index(0.0, 1.0, 1.0, 0.95) - gibl_index(0.0, 1.0, 1.0, 0.95)) > 0.1


def test_gicg_agrees_with_gibl_for_small_s():
    # both reduce to the same diffusion limit when s is small
    a = gibl_index(0.0, 2000.0, 1.0, 0.9)
    b = gicg_index(0.0, 2000.0, 1.0, 0.9)
    assert a == pytest.approx(b, rel=1e-9)


def test_approximation_domain_errors():
    with pytest.raises(DomainError):
        gibl_index(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        gicg_index(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        normal_moment_args(2.0, 1.0, exponential())


def test_moment_args_bernoulli():
    mu, n_eff, tau_eff = normal_moment_args(1.0, 4.0, BERN)
    assert mu == 0.25
    assert tau_eff == pytest.approx(1.0 / (0.25 * 0.75))
    assert n_eff == pytest.approx(5.0 / (0.25 * 0.75))


# -- tables ------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_table():
    return build_bernoulli_gi_table(1.0, 2.0, 0.9, depth=24, spot_checks=0)


def test_bernoulli_table_matches_per_state_bisection(small_table):
    for s, n in [(1, 2), (1, 5), (3, 6), (5, 12), (10, 26)]:
        exact = gittins_index(ArmBelief(s, n), BERN, 0.9)
        got = bernoulli_gi_lookup(small_table, float(s), float(n))
        assert got == pytest.approx(exact, abs=5e-6)


def test_bernoulli_table_never_below_mean(small_table):
    import numpy as np

    h = small_table.header
    for m in range(h["depth"] + 1):
        for j in range(m + 1):
            v = bernoulli_gi_lookup(small_table, 1.0 + j, 2.0 + m)
            assert v >= (1.0 + j) / (2.0 + m) - 1e-12


def test_bernoulli_table_lookup_validation(small_table):
    with pytest.raises(ConfigError):
        bernoulli_gi_lookup(small_table, 1.5, 3.0)
    with pytest.raises(ConfigError):
        bernoulli_gi_lookup(small_table, 1.0, 2.0 + 25)


def test_table_roundtrip_and_checksum(tmp_path, small_table):
    p = tmp_path / "t.idx"
    save_index_table(small_table, p)
    again = load_index_table(p)
    assert again.header["gamma"] == 0.9
    assert np.array_equal(again.values, small_table.values)
    save_index_table(small_table, p)  # idempotent
    raw = bytearray(p.read_bytes())
    raw[len(raw) // 2] ^= 0xFF
    p.write_bytes(bytes(raw))
    with pytest.raises(ConfigError):
        load_index_table(p)


def test_table_refuses_silent_overwrite(tmp_path, small_table):
    p = tmp_path / "t.idx"
    save_index_table(small_table, p)
    other = build_bernoulli_gi_table(1.0, 2.0, 0.9, depth=3, spot_checks=0)
    with pytest.raises(ConfigError):
        save_index_table(other, p)
    save_index_table(other, p, force=True)
    assert load_index_table(p).header["depth"] == 3


def test_bernoulli_table_finite_horizon():
    # layer m of a finite-horizon table holds the index for remaining
    # horizon T - m (the dynamic Whittle convention)
    table = build_bernoulli_gi_table(1.0, 2.0, 0.9, depth=6, horizon=40, spot_checks=0)
    for s, n, m in [(1, 2, 0), (2, 4, 2), (3, 7, 5)]:
        exact = gittins_index(ArmBelief(s, n), BERN, 0.9, t=40 - m)
        got = bernoulli_gi_lookup(table, float(s), float(n))
        assert got == pytest.approx(exact, abs=5e-6)
    with pytest.raises(ConfigError):
        build_bernoulli_gi_table(1.0, 2.0, 0.9, depth=50, horizon=40)


def test_gaussian_bonus_table_interpolation():
    t = build_gaussian_bonus_table(0.9, 1.0, 64.0, points_per_decade=6)
    grid = t.header["n_grid"]
    got = gaussian_bonus_lookup(t, np.array(grid))
    assert np.allclose(got, t.values, atol=1e-12)
    mid = math.sqrt(grid[0] * grid[1])
    v = gaussian_bonus_lookup(t, mid)
    assert t.values[1] < v < t.values[0]
    assert gaussian_bonus_lookup(t, 1e9) < 1e-4
    with pytest.raises(ConfigError):
        gaussian_bonus_lookup(t, 0.5)
