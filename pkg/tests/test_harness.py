import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from uavdefense import harness as hz
from uavdefense.engine import ConfigError, Outcome, RunRecord, ScenarioConfig


def fake_records(ticks, base=ScenarioConfig(), timeouts=0):
    recs = [RunRecord(seed=base.seed + i, outcome=Outcome.ESCORTED, escort_ticks=t,
                      clusterless_final=i % 3, config=base.replace(seed=base.seed + i))
            for i, t in enumerate(ticks)]
    for k in range(timeouts):
        s = base.seed + len(ticks) + k
        recs.append(RunRecord(seed=s, outcome=Outcome.TIMEOUT, escort_ticks=base.max_ticks,
                              clusterless_final=5, config=base.replace(seed=s)))
    return recs


# -- statistics ---------------------------------------------------------------

def ad_oracle(x):
    # direct evaluation of the A2 sum with fitted mean and sample sd
    x = np.sort(np.asarray(x, float))
    n = len(x)
    z = (x - x.mean()) / x.std(ddof=1)
    cdf = stats.norm.cdf(z)
    i = np.arange(1, n + 1)
    a2 = -n - np.sum((2 * i - 1) * (np.log(cdf) + np.log1p(-cdf[::-1]))) / n
    return a2 * (1 + 0.75 / n + 2.25 / n ** 2)


def p_oracle(a):
    if a >= 0.6:
        return math.exp(1.2937 - 5.709 * a + 0.0186 * a * a)
    if a >= 0.34:
        return math.exp(0.9177 - 4.279 * a - 1.38 * a * a)
    if a >= 0.2:
        return 1 - math.exp(-8.318 + 42.796 * a - 59.938 * a * a)
    return 1 - math.exp(-13.436 + 101.14 * a - 223.73 * a * a)


@settings(deadline=None)
@given(st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=8, max_size=200))
def test_anderson_darling_matches_oracle(xs):
    x = np.array(xs)
    if np.ptp(x) < 1e-6 * max(1.0, np.abs(x).max()):
        return
    a, p = hz.anderson_darling_normality(x)
    want = ad_oracle(x)
    assert math.isclose(a, want, rel_tol=1e-6, abs_tol=1e-9)
    if want <= 13:
        assert math.isclose(p, p_oracle(want), rel_tol=1e-5, abs_tol=1e-9)
    assert 0.0 <= p <= 1.0


def test_anderson_darling_examples():
    rng = np.random.default_rng(0)
    _, p = hz.anderson_darling_normality(rng.normal(1000, 50, 200))
    assert p > 0.05
    _, p = hz.anderson_darling_normality(rng.uniform(0, 1, 500))
    assert p < 0.01
    with pytest.raises(hz.StatisticsError):
        hz.anderson_darling_normality([5.0] * 20)
    with pytest.raises(hz.StatisticsError):
        hz.anderson_darling_normality([1.0, 2.0])


def test_rank_tests():
    assert hz.mann_whitney_greater([10, 11, 12, 13, 14], [1, 2, 3, 4, 5]) < 0.01
    rho, p = hz.spearman([0, 25, 50, 100], [1.0, 2.0, 3.0, 4.0])
    assert rho == 1.0 and p < 0.05


# -- sweep descriptions ---------------------------------------------------------

def test_parse_values():
    assert hz.parse_values("eps_d", "40,50,60") == [40.0, 50.0, 60.0]
    assert hz.parse_values("eps_d", "40:70:10") == [40.0, 50.0, 60.0, 70.0]
    assert hz.parse_values("n_branches", "2:4:1") == [2, 3, 4]
    assert hz.parse_values("speed", "0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    assert hz.parse_values("eps_d", "40:65:10") == [40.0, 50.0, 60.0]
    for bad in [("seed", "1,2"), ("eps_d", "5:1:1"), ("eps_d", "1:2:0"), ("eps_d", ""),
                ("eps_d", "1:2"), ("pair_rule", "self"), ("eps_d", "x")]:
        with pytest.raises(ConfigError):
            hz.parse_values(*bad)


def test_sweep_seed_policy():
    spec = hz.SweepSpec("eps_d", [40.0, 50.0], runs_per_value=3)
    cells = hz.sweep_configs(ScenarioConfig(seed=100), spec)
    assert [[c.seed for c in cell] for cell in cells] == [[100, 101, 102], [103, 104, 105]]
    assert all(c.eps_d == 50.0 for c in cells[1])
    with pytest.raises(ConfigError):
        hz.sweep_configs(ScenarioConfig(), hz.SweepSpec("eps_d", [5.0], 1))
    with pytest.raises(ConfigError):
        hz.SweepSpec("eps_d", [], 1)


def test_summary_statistics():
    row = hz.summarize("eps_d", 40.0, fake_records([10, 20, 30, 40, 50, 60, 70, 80], timeouts=2))
    assert (row.n_success, row.n_timeout, row.runs) == (8, 2, 10)
    assert row.mean_ticks == 45.0 and row.min_ticks == 10 and row.max_ticks == 80
    assert math.isclose(row.std_ticks, np.std(np.arange(10, 90, 10), ddof=1))
    assert math.isclose(row.success_rate, 0.8)
    assert not math.isnan(row.ad_statistic)
    empty = hz.summarize("eps_d", 70.0, fake_records([], timeouts=3))
    assert empty.n_success == 0 and math.isnan(empty.mean_ticks) and math.isnan(empty.ad_p_value)


def test_sweep_rows_sorted_and_consistent():
    base = ScenarioConfig(max_ticks=40, n_duavs=6)
    spec = hz.SweepSpec("comm_range", [150.0, 50.0], runs_per_value=2)
    recs = []
    rows = hz.sweep(base, spec, records_out=recs)
    assert [r.value for r in rows] == [50.0, 150.0]
    assert len(recs) == 4 and [r.seed for r in recs] == [0, 1, 2, 3]
    again = hz.summaries_from_records("comm_range", recs)
    assert [(r.value, r.n_success, r.n_timeout) for r in again] == \
        [(r.value, r.n_success, r.n_timeout) for r in rows]


def test_batch_seeds_and_workers_agree():
    base = ScenarioConfig(seed=5, max_ticks=30, n_duavs=5)
    a = hz.batch(base, 3)
    assert [r.seed for r in a] == [5, 6, 7]
    assert hz.batch(base, 3, workers=2) == a


# -- CSV ----------------------------------------------------------------------

def test_records_csv_round_trip(tmp_path):
    recs = fake_records(list(range(100, 200)), ScenarioConfig(theta_override=0.5), timeouts=0)
    path = tmp_path / "runs.csv"
    hz.emit_records_csv(recs, path)
    text = path.read_text()
    assert len(text.splitlines()) == 101
    assert text.splitlines()[0].split(",") == list(hz.RECORD_COLUMNS)
    assert hz.parse_records_csv(path) == recs


def test_header_only_files(tmp_path):
    p = tmp_path / "empty.csv"
    hz.emit_records_csv([], p)
    assert p.read_text() == ",".join(hz.RECORD_COLUMNS) + "\n"
    assert hz.parse_records_csv(p) == []
    hz.emit_summary_csv([], p)
    assert hz.parse_summary_csv(p) == []


def test_summary_csv_round_trip(tmp_path):
    rows = [hz.summarize("eps_d", 40.0, fake_records([5, 9, 12, 7, 30, 11, 10, 8])),
            hz.summarize("eps_d", 70.0, fake_records([], timeouts=4))]
    p = tmp_path / "s.csv"
    hz.emit_summary_csv(rows, p)
    back = hz.parse_summary_csv(p)
    for a, b in zip(rows, back):
        for k in hz.SUMMARY_COLUMNS:
            x, y = getattr(a, k), getattr(b, k)
            assert x == y or (isinstance(x, float) and math.isnan(x) and math.isnan(y))


def test_bad_header_rejected(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        hz.parse_records_csv(p)
    with pytest.raises(ValueError):
        hz.parse_summary_csv(p)



@pytest.mark.slow
def test_clusterless_grows_with_swarm_size():
    xs, ys = [], []
    for n in (10, 20, 30, 40):
        for r in hz.batch(ScenarioConfig(n_duavs=n), 25):
            xs.append(n)
            ys.append(r.clusterless_final)
    rho, p = hz.spearman(xs, ys)
    means = [np.mean(ys[k:k + 25]) for k in range(0, 100, 25)]
    assert rho > 0 and p < 0.05
    assert all(a <= b for a, b in zip(means, means[1:])), means
