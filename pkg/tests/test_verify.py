import itertools
import logging
import random
from fractions import Fraction

import pytest

from xorpir.core import BitString, Database, pack_symbols
from xorpir.errors import HypothesisNotMet, ParameterError
from xorpir.params import SchemeParams
from xorpir.verify import (
    EnumerationTooLarge,
    Limits,
    alpha_upper_bound,
    bounds,
    check_correctness_exhaustive,
    check_privacy_exact,
    empirical_alpha,
    exact_privacy_distribution,
    leaky_con3_builder,
    lower_bound_download,
    measure_download,
    optimal_download,
    run_protocol,
    statistical_privacy_test,
)


def P(text):
    return SchemeParams.parse(text)


# ---------------------------------------------------------------- run_protocol


def test_run_protocol_con3_download():
    p = P("CON3:n=3,k=2,R=2")
    for seed in range(10):
        db = Database.random(2, 2, random.Random(seed))
        out, tr = run_protocol(p, db, 1 + seed % 2, seed)
        assert out == db.record(1 + seed % 2)
        assert tr.total_download == 3


def test_run_protocol_con1_skip_zero_download():
    p = P("CON1:k=2,R=2,skip_zero=1")
    db = Database.from_strings(["10", "01"])
    seen = set()
    for a in range(16):
        _, tr = run_protocol(p, db, 1, randomness=BitString(a, 4))
        seen.add(tr.total_download)
    assert seen == {2, 3}


def test_run_protocol_chor2_trace():
    p = P("CHOR2:k=3,R=1")
    out, tr = run_protocol(p, Database.from_strings(["1", "0", "1"]), 2, randomness=BitString.from_str("110"))
    assert str(out) == "0"
    assert tr.download_bits_per_server == (1, 1)


def test_run_protocol_seed_is_deterministic():
    p = P("CON5:n=2,k=2,R=4")
    db = Database.from_strings(["1010", "0111"])
    assert run_protocol(p, db, 2, 123) == run_protocol(p, db, 2, 123)


# ---------------------------------------------------------------- correctness


@pytest.mark.parametrize(
    "text, runs",
    [
        ("CHOR2:k=2,R=1", 4 * 2 * 4),
        ("CHOR2:k=2,R=2", 16 * 2 * 4),
        ("CON3:n=2,k=2,R=1", 4 * 2 * 4),
        ("CON3:n=3,k=2,R=2", 16 * 2 * 9),
        ("CON1:k=2,R=1,skip_zero=1", 4 * 2 * 4),
        ("CON2:k=2,R=2", 16 * 2 * 9),
        ("CON4:k=2,R=2,s=2,t=3", 16 * 2 * 9),
    ],
)
def test_correctness_exhaustive(text, runs):
    v = check_correctness_exhaustive(P(text))
    assert v.passed and v.mode == "exhaustive"
    assert v.runs == runs and v.failures == 0
    assert v.to_dict()["verdict"] == "pass"


def test_correctness_downgrades_loudly(caplog):
    p = P("CON5:n=2,k=2,R=4")
    with caplog.at_level(logging.WARNING):
        v = check_correctness_exhaustive(p, Limits(max_runs=200, seed=1))
    assert v.passed
    assert v.mode == "sampled"
    assert any("sampled" in note for note in v.notes)
    assert "downgraded" in caplog.text


def test_correctness_detects_a_broken_reconstruction(monkeypatch):
    from xorpir.schemes.shift import Con3

    p = P("CON3:n=2,k=2,R=1")
    original = Con3.reconstruct

    def flipped(self, params, state, responses):
        out = original(self, params, state, responses)
        return BitString(out.value ^ ((1 << out.length) - 1), out.length)

    monkeypatch.setattr(Con3, "reconstruct", flipped)
    v = check_correctness_exhaustive(p)
    assert not v.passed and v.failures == v.runs
    assert v.first_failure is not None


# ---------------------------------------------------------------- privacy


def test_con3_uniform_exact():
    p = P("CON3:n=3,k=2,R=2")
    everything = {pack_symbols(v, 3) for v in itertools.product(range(3), repeat=2)}
    for r in (1, 2, 3):
        for ell in (1, 2):
            d = exact_privacy_distribution(p, r, ell)
            assert set(d) == everything
            assert set(d.values()) == {Fraction(1, 9)}


def test_chor2_uniform_exact():
    p = P("CHOR2:k=2,R=1")
    for r in (1, 2):
        for ell in (1, 2):
            d = exact_privacy_distribution(p, r, ell)
            assert d == {BitString(v, 2): Fraction(1, 4) for v in range(4)}


@pytest.mark.parametrize(
    "text",
    ["CHOR2:k=3,R=1", "CON1:k=2,R=2", "CON2:k=2,R=2", "CON3:n=3,k=2,R=2", "CON4:k=2,R=4,s=2,t=3",
     "CON6:n=2,k=2,R=4", "CON6:n=3,k=2,R=18", "CON5:n=2,k=2,R=4"],
)
def test_exact_privacy_all_servers(text):
    p = P(text)
    for r in range(1, p.n + 1):
        rep = check_privacy_exact(p, r)
        assert rep.passed, rep.detail


def test_con5_distributions_identical_across_records():
    p = P("CON5:n=2,k=2,R=4")
    d1 = exact_privacy_distribution(p, 1, 1)
    d2 = exact_privacy_distribution(p, 1, 2)
    assert d1 == d2
    assert sum(d1.values()) == 1


def test_negative_control_fails_exact():
    p = P("CON3:n=3,k=2,R=2")
    rep = check_privacy_exact(p, 1, builder=leaky_con3_builder)
    assert rep.verdict == "fail"


def test_enumeration_limit():
    with pytest.raises(EnumerationTooLarge):
        exact_privacy_distribution(P("CON5:n=3,k=2,R=9"), 1, 1, limit=1000)


def test_statistical_pass_and_negative_control():
    p = P("CON3:n=3,k=3,R=2")
    assert statistical_privacy_test(p, 1, 10**5, 0.01, seed=0).verdict == "pass"
    bad = statistical_privacy_test(p, 1, 10**4, 0.01, seed=0, builder=leaky_con3_builder)
    assert bad.verdict == "fail"
    assert max(bad.detail["p_values"].values()) < 1e-6


def test_statistical_con6():
    assert statistical_privacy_test(P("CON6:n=2,k=2,R=4"), 1, 10**4, seed=1).verdict == "pass"


def test_statistical_coarsens_then_gives_up():
    p = P("CON3:n=5,k=4,R=4")  # 625 possible queries
    rep = statistical_privacy_test(p, 2, 2000, seed=0)
    assert rep.verdict == "pass"
    assert "marginal" in rep.detail["coarsening"]
    rep = statistical_privacy_test(p, 2, 50, seed=0)
    assert rep.verdict == "inconclusive"


# ---------------------------------------------------------------- bounds


def oracle_lower_bound(n, k, R):
    # R+1 for k >= 2; the n/(n-1) bound once k exceeds ceil(R/(n-1))
    import math

    if k == 1:
        return R
    best = R + 1
    if k >= math.ceil(R / (n - 1)) + 1:
        best = max(best, math.ceil(n * R / (n - 1)))
    return best


@pytest.mark.parametrize("n, k, R, expected", [(2, 10, 8, 16), (100, 2, 8, 9), (3, 2, 8, 9)])
def test_lower_bound_examples(n, k, R, expected):
    assert lower_bound_download(n, k, R) == expected


def test_lower_bound_matches_oracle():
    for n, k, R in itertools.product(range(2, 7), range(1, 8), range(1, 13)):
        assert lower_bound_download(n, k, R) == oracle_lower_bound(n, k, R)


@pytest.mark.parametrize("k, R, expected", [(3, 2, Fraction(3, 7)), (3, 1, Fraction(1, 2)), (100, 1, Fraction(2, 101))])
def test_alpha_upper_bound(k, R, expected):
    assert alpha_upper_bound(k, R) == expected


def test_alpha_hypothesis():
    with pytest.raises(HypothesisNotMet):
        alpha_upper_bound(2, 2)


def test_bounds_report():
    rep = bounds(2, 10, 8)
    assert rep.lower_bound_bits == 16
    assert rep.optimal_rate_download_bits == optimal_download(2, 10, 8) == Fraction(1023, 64)
    assert rep.alpha_upper == Fraction(9, 81)
    assert bounds(3, 2, 8).alpha_upper is None
    assert set(rep.to_dict()) >= {"lower_bound_bits", "optimal_rate_download_bits"}


def test_optimal_download_values():
    assert optimal_download(3, 2, 9) == 12
    assert optimal_download(2, 2, 4) == 6


# ---------------------------------------------------------------- measured download and alpha


@pytest.mark.parametrize(
    "text, alpha",
    [("CON1:k=2,R=2", Fraction(3, 16)), ("CON1:k=3,R=2", Fraction(3, 64)), ("CON1:k=3,R=1", Fraction(2, 8))],
)
def test_empirical_alpha_exhaustive(text, alpha):
    p = P(text)
    # oracle: alpha = 0 or alpha = a unit vector inside record ell
    assert Fraction(1 + p.R, 2 ** (p.k * p.R)) == alpha
    assert empirical_alpha(p) == alpha
    if p.k >= 3:
        assert alpha <= alpha_upper_bound(p.k, p.R)


def test_empirical_alpha_sampled_is_close():
    a = empirical_alpha(P("CON1:k=3,R=1"), trials=4000, seed=3)
    assert abs(float(a) - 0.25) < 0.03


def test_empirical_alpha_needs_con1():
    with pytest.raises(ParameterError):
        empirical_alpha(P("CON3:n=2,k=2,R=1"))


def test_measure_download_exhaustive_mean():
    m = measure_download(P("CON3:n=2,k=2,R=1,skip_zero=1"))
    assert m.exhaustive and (m.worst, m.mean) == (2, Fraction(3, 2))


def test_measure_download_respects_bound():
    for text in ["CON3:n=2,k=10,R=8", "CON3:n=3,k=5,R=8", "CON6:n=2,k=2,R=4", "CHOR2:k=3,R=2"]:
        p = P(text)
        m = measure_download(p, limit=512)
        assert m.worst >= lower_bound_download(p.n, p.k, p.R)
    assert measure_download(P("CON3:n=2,k=10,R=8"), limit=512).worst == 16
