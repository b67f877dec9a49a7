import numpy as np
import pytest
from scipy.special import ndtri

from ldplab.oracles import EstimateVector
from ldplab.params import derive_params
from ldplab.postprocess import (
    RecoveryMethod,
    base_cut,
    consistency_check,
    ldprecover,
    norm_sub,
    normalization,
    rsn,
)

PARAMS = derive_params("OUE", 1.0, 64, 10_000)


def rand_freqs(rng, d=64):
    # noisy frequency vectors: mixed signs, sums scattered around 1
    x = rng.dirichlet(np.ones(d)) + rng.normal(0, 0.02, d)
    return x * rng.uniform(0.7, 1.3)


# ---------------------------------------------------------------- norm-sub

def test_norm_sub_frozen_example():
    res = norm_sub(np.array([0.5, 0.3, -0.1, 0.1]))
    assert res.delta == pytest.approx(1 / 30)
    np.testing.assert_allclose(res.freqs, [0.5 + 1 / 30, 0.3 + 1 / 30, 0.0, 0.1 + 1 / 30],
                               atol=1e-12)


def test_norm_sub_consistent_input_unchanged():
    x = np.array([0.25, 0.5, 0.25])
    res = norm_sub(x)
    assert res.delta == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(res.freqs, x, atol=1e-12)


def test_norm_sub_sums_to_one_randomized():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        out = norm_sub(rand_freqs(rng)).freqs
        assert consistency_check(out)


def test_norm_sub_all_negative_still_solvable():
    out = norm_sub(np.array([-0.5, -1.0, -0.25])).freqs
    assert consistency_check(out)


def test_norm_sub_rejects_nonfinite():
    with pytest.raises(ValueError):
        norm_sub(np.array([0.1, np.nan]))


# ---------------------------------------------------------------- base-cut

def test_base_cut_threshold_formula():
    res = base_cut(np.zeros(64), PARAMS, alpha=0.05)
    expect = ndtri(1 - 0.05 / 64) * PARAMS.sigma0() / PARAMS.n
    assert res.delta == pytest.approx(expect)
    assert np.all(res.freqs == 0)


def test_base_cut_large_epsilon_passthrough():
    par = derive_params("OUE", 12.0, 16, 10**6)
    x = np.array([0.5, 0.3, 0.2] + [0.0] * 13)
    out = base_cut(x, par, alpha=0.05).freqs
    np.testing.assert_allclose(out[:3], x[:3])


def test_base_cut_never_increases_kept_entries():
    # entries are either kept verbatim or zeroed, so nothing ever exceeds
    # max(original, 0)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = rand_freqs(rng)
        out = base_cut(x, PARAMS).freqs
        assert np.all((out == x) | (out == 0))
        assert np.all(out <= np.maximum(x, 0) + 1e-15)


def test_base_cut_frozen_desk_threshold():
    # d=1024, eps=1, n=1e6, alpha=0.05: quantile at 1 - 4.8828e-5
    par = derive_params("OUE", 1.0, 1024, 10**6)
    res = base_cut(np.zeros(1024), par, alpha=0.05)
    z = ndtri(1 - 0.05 / 1024)
    assert z == pytest.approx(3.896342532608549, abs=1e-9)
    assert res.delta == pytest.approx(z * par.sigma0() / par.n)


# ----------------------------------------------------------- normalization

def test_normalization_frozen_example():
    out = normalization(np.array([0.5, 0.3, -0.1, 0.1])).freqs
    np.testing.assert_allclose(out, [0.5, 1 / 3, 0.0, 1 / 6], atol=1e-12)


def test_normalization_fixed_point():
    x = np.array([0.6, 0.4, 0.0])
    np.testing.assert_allclose(normalization(x).freqs, x, atol=1e-12)


def test_normalization_scale_invariant():
    rng = np.random.default_rng(2)
    x = rand_freqs(rng)
    a = normalization(x).freqs
    b = normalization(3.7 * x).freqs
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_normalization_rejects_constant():
    with pytest.raises(ValueError):
        normalization(np.full(8, 0.125) * 0 + 0.3)


# ------------------------------------------------------------- ldprecover

def test_ldprecover_consistent_input_fixed():
    x = np.array([0.5, 0.25, 0.25, 0.0])
    par = derive_params("OUE", 1.0, 4, 10**5)
    out = ldprecover(x, par).freqs
    np.testing.assert_allclose(out, x, atol=1e-6)


def test_ldprecover_always_consistent():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        out = ldprecover(rand_freqs(rng), PARAMS).freqs
        assert consistency_check(out)


# -------------------------------------------------------------------- rsn

def test_rsn_hand_case():
    # n=1000, tau forced to 40 via a params stub: L = {30, -10}; the
    # conservation sum_L max(C+delta,0) = 1000 - 980 = 20 gives delta=-10,
    # adjusted counts [900, 80, 20, 0], frequencies [0.9, 0.08, 0.02, 0].
    class Stub:
        n = 1000

        @staticmethod
        def sigma0():
            return 10.0  # tau = 4 sigma0 = 40

        class protocol:
            family = "OUE"

    est = EstimateVector(counts=np.array([900.0, 80.0, 30.0, -10.0]),
                         freqs=np.array([0.9, 0.08, 0.03, -0.01]), n=1000)
    res = rsn(est, Stub())
    assert res.delta == pytest.approx(-10.0)
    np.testing.assert_allclose(res.freqs, [0.9, 0.08, 0.02, 0.0], atol=1e-12)
    assert list(np.flatnonzero(res.region_low)) == [2, 3]


def test_rsn_no_low_region_is_plain_normalization():
    par = derive_params("OUE", 1.0, 3, 100)
    tau = 4 * par.sigma0()
    c = np.array([tau + 50, tau + 30, tau + 20])
    est = EstimateVector(counts=c, freqs=c / 100, n=100)
    out = rsn(est, par).freqs
    np.testing.assert_allclose(out, c / c.sum(), atol=1e-15)


def test_rsn_high_region_ratios_preserved():
    rng = np.random.default_rng(4)
    par = derive_params("OUE", 1.0, 64, 10_000)
    tau = 4 * par.sigma0()
    for _ in range(200):
        c = rng.normal(0, tau / 2, 64)
        c[:6] = tau * rng.uniform(1.5, 30, 6)  # guaranteed high region
        est = EstimateVector(counts=c, freqs=c / 10_000, n=10_000)
        res = rsn(est, par)
        out = res.freqs
        high = ~res.region_low
        idx = np.flatnonzero(high)
        base = c[idx[0]] / c[idx[1]]
        assert out[idx[0]] / out[idx[1]] == pytest.approx(base, rel=1e-12)
        assert consistency_check(out)


def test_rsn_degenerate_total_rejected():
    est = EstimateVector(counts=np.array([-5.0, -10.0]), freqs=np.array([-0.5, -1.0]), n=10)
    with pytest.raises(ValueError):
        rsn(est, PARAMS)


# ------------------------------------------------------------- invariants

@pytest.mark.parametrize("method", ["norm_sub", "normalization", "ldprecover", "rsn"])
def test_idempotence(method):
    rng = np.random.default_rng(5)
    par = derive_params("OUE", 1.0, 64, 10_000)
    for _ in range(100):
        x = rand_freqs(rng)
        if method == "norm_sub":
            once = norm_sub(x).freqs
            twice = norm_sub(once).freqs
        elif method == "normalization":
            once = normalization(x).freqs
            twice = normalization(once).freqs
        elif method == "ldprecover":
            once = ldprecover(x, par).freqs
            twice = ldprecover(once, par).freqs
        else:
            est = EstimateVector(counts=x * par.n, freqs=x, n=par.n)
            once = rsn(est, par).freqs
            est2 = EstimateVector(counts=once * par.n, freqs=once, n=par.n)
            twice = rsn(est2, par).freqs
        np.testing.assert_allclose(twice, once, atol=1e-9)


def test_order_preservation_unclipped():
    rng = np.random.default_rng(6)
    for _ in range(100):
        x = rand_freqs(rng)
        out = norm_sub(x).freqs
        kept = out > 0
        xi = x[kept]
        oi = out[kept]
        assert np.all(np.argsort(xi, kind="stable") == np.argsort(oi, kind="stable"))


def test_consistency_check_cases():
    assert consistency_check([0.2, 0.8])
    assert not consistency_check([1.2, -0.2])
    assert not consistency_check([0.5, 0.4])
