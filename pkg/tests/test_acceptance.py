"""End-to-end acceptance checks, one verdict line per criterion.

Each test prints `[acceptance] criterion N: PASS/FAIL (...)` and the same
lines are echoed in the terminal summary. The desk-scale end-to-end block
shares one set of seven training runs across its sub-criteria.
"""

import math
import random
import statistics
import time

import numpy as np
import pytest

from dstar.aggregation import (
    FilterThresholds,
    aggregate_krum,
    compute_thresholds,
    dstar_aggregate,
    filter_gradient,
    theoretical_alpha,
)
from dstar.attacks import HonestStats, attack_empire, attack_little, honest_stats
from dstar.cli import main
from dstar.config import AttackSpec, DatasetSpec, ExperimentConfig, GarParams
from dstar.data import Shard
from dstar.models import gradient, init_model, loss_and_accuracy, with_theta
from dstar.numerics import RngStream, coordinate_median
from dstar.reporting import final_accuracy
from dstar.simulation import WorkerSpec, run_experiment, sample_arrivals


# --- 1: analytic gradients against central finite differences ---------------

def _central_fd(model, x, y, h):
    base = model.theta
    out = np.empty_like(base)
    for i in range(base.size):
        plus = base.copy(); plus[i] += h
        minus = base.copy(); minus[i] -= h
        lp, _ = loss_and_accuracy(with_theta(model, plus), x, y)
        lm, _ = loss_and_accuracy(with_theta(model, minus), x, y)
        out[i] = (lp - lm) / (2 * h)
    return out


def test_criterion_1_gradient_oracle(report):
    t0 = time.perf_counter()
    rng = RngStream(101, 0)
    worst = 0.0
    cases = 0
    for i in range(110):
        kind = "logistic" if i % 2 == 0 else "mlp1"
        p = int(rng.integers(1, 7))
        C = int(rng.integers(2, 6))
        hidden = int(rng.integers(2, 7))
        m = int(rng.integers(1, 9))
        model = init_model(kind, p, C, hidden, rng)
        model = with_theta(model, model.theta + 0.5 * rng.normal(size=model.theta.shape))
        x = rng.normal(size=(m, p))
        y = np.asarray(rng.integers(0, C, size=m))
        analytic = gradient(model, x, y)
        fd = _central_fd(model, x, y, h=1e-5)
        err = float(np.max(np.abs(analytic - fd)) / max(1.0, np.max(np.abs(analytic))))
        worst = max(worst, err)
        cases += 1
    elapsed = time.perf_counter() - t0
    ok = cases >= 100 and worst <= 1e-5 and elapsed < 60.0
    assert report("1", ok, f"{cases} cases, max rel err {worst:.2e}, {elapsed:.1f}s")


# --- 2: coordinate median ignores Byzantine extremes -------------------------

def test_criterion_2_median_robustness(report):
    rng = RngStream(202, 0)
    n = 25
    violations = 0
    for _ in range(1000):
        f = int(rng.integers(0, 13))
        d = int(rng.integers(1, 9))
        honest = 10.0 * rng.normal(size=(n - f, d))
        signs = np.where(np.asarray(rng.uniform(size=(f, d))) < 0.5, -1.0, 1.0)
        vectors = [honest[i] for i in range(n - f)]
        vectors += [signs[j] * 1e12 for j in range(f)]
        order = np.asarray(rng.permutation(n))
        med = coordinate_median([vectors[i] for i in order])
        lo, hi = honest.min(axis=0), honest.max(axis=0)
        if not (np.all(med >= lo) and np.all(med <= hi)):
            violations += 1
    ok = violations == 0
    assert report("2", ok, f"1000 trials, {violations} outside the honest envelope")


# --- 3: filtered aggregation stays aligned with the true gradient -----------

def _mc_aggregations(attack_kind: str, target: int, rng: RngStream):
    n, f, k, d, sigma = 25, 8, 8, 10, 0.1
    grad_f = np.zeros(d)
    grad_f[0] = 1.0

    def malicious(honest_rows):
        stats = honest_stats(list(honest_rows))
        if attack_kind == "little":
            return attack_little(stats, n, f)
        return attack_empire(stats, 1.0)

    S_list, D_list = [], []
    g_m = g_v = None
    for _ in range(5):
        honest = grad_f + sigma * rng.normal(size=(n - f, d))
        mal = malicious(honest)
        g_m = coordinate_median(list(honest) + [mal] * f)
        g_v = grad_f + sigma * rng.normal(size=d)
        th = compute_thresholds(g_m, g_v)
        S_list.append(th.S)
        D_list.append(th.D)
    thresholds = FilterThresholds(S=statistics.median(S_list),
                                  D=statistics.median(D_list), g_m=g_m, g_v1=g_v)

    dots = []
    attempts = 0
    while len(dots) < target and attempts < 3 * target:
        attempts += 1
        honest = grad_f + sigma * rng.normal(size=(n - f, d))
        mal = malicious(honest)
        g_v = grad_f + sigma * rng.normal(size=d)
        accepted = []
        # malicious replies arrive first: their delays are ~200x shorter
        for g in [mal] * f + list(honest):
            if filter_gradient(g, g_v, thresholds).accepted:
                accepted.append(g)
                if len(accepted) == k:
                    break
        if accepted:
            dots.append(float(dstar_aggregate(accepted)[0]))
    return np.asarray(dots), attempts


def test_criterion_3_filtered_alignment(report):
    t0 = time.perf_counter()
    # the noise level keeps the theoretical angle defined: sin(alpha) < 1
    alpha = theoretical_alpha(25, 8, 8, d_sigma2=10 * 0.1**2,
                              V_hat=1.1, Vprime_hat=1.1, grad_norm=1.0)
    assert alpha > 0
    details = []
    ok = True
    for attack_kind in ("little", "empire"):
        dots, attempts = _mc_aggregations(attack_kind, 10_000, RngStream(303, 1))
        mean = float(dots.mean())
        half = 2.576 * float(dots.std(ddof=1)) / math.sqrt(len(dots))
        attack_ok = len(dots) == 10_000 and mean - half > 0
        ok = ok and attack_ok
        details.append(f"{attack_kind}: mean dot {mean:.4f} +- {half:.4f}"
                       f" over {len(dots)} aggregations")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 120.0
    assert report("3", ok, "; ".join(details) + f", {elapsed:.1f}s")


# --- 4: the hidden-shift quantile ---------------------------------------------


def _erf_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _quantile_by_bisection(p: float) -> float:
    lo, hi = -10.0, 10.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if _erf_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def test_criterion_4_little_zmax(report):
    stats = HonestStats(mu=np.zeros(1), sigma=np.ones(1), count=17)
    z = float(attack_little(stats, N=25, f=8)[0])
    oracle = _quantile_by_bisection(0.8)  # s = 5 of 25 -> p = 0.8
    ok = abs(z - 0.84162) <= 1e-3 and abs(z - oracle) <= 1e-9
    assert report("4", ok, f"z_max {z:.10f}, bisection oracle {oracle:.10f}")


# --- 5: desk-scale end-to-end table -------------------------------------------

_CELLS = {
    "average_none": ("average", "none"),
    "dstar_none": ("dstar", "none"),
    "dstar_little": ("dstar", "little"),
    "dstar_empire": ("dstar", "empire"),
    "trmean_none": ("trmean", "none"),
    "trmean_little": ("trmean", "little"),
    "average_empire": ("average", "empire"),
}


@pytest.fixture(scope="module")
def desk_runs():
    accs = {}
    t0 = time.perf_counter()
    for name, (gar, attack) in _CELLS.items():
        config = ExperimentConfig(
            N=25, f=8, k=8, T=500, eta=0.1, seed=1, gar=gar,
            attack=AttackSpec(kind=attack, scale=1.0),
            dataset=DatasetSpec(kind="blobs", n=10_000, p=20, classes=2,
                                separation=10.0),
            gar_params=GarParams(f=8, b=8), eval_every=10,
        )
        accs[name] = final_accuracy(run_experiment(config))
    return accs, time.perf_counter() - t0


def test_criterion_5a_faultfree_average(desk_runs, report):
    accs, elapsed = desk_runs
    acc = accs["average_none"]
    ok = acc >= 0.95 and elapsed < 300.0
    assert report("5a", ok, f"fault-free average accuracy {acc:.3f},"
                            f" all 7 runs took {elapsed:.1f}s")


def test_criterion_5b_filter_under_attack(desk_runs, report):
    accs, _ = desk_runs
    clean = accs["dstar_none"]
    gaps = {kind: clean - accs[f"dstar_{kind}"] for kind in ("little", "empire")}
    ok = all(gap <= 0.02 for gap in gaps.values())
    assert report("5b", ok, f"clean {clean:.3f}, drop under little {gaps['little']:.3f},"
                            f" under empire {gaps['empire']:.3f} (allowed 0.02)")


def test_criterion_5c_trmean_degraded_by_little(desk_runs, report):
    accs, _ = desk_runs
    drop = accs["trmean_none"] - accs["trmean_little"]
    ok = drop >= 0.20
    assert report("5c", ok, f"trmean clean {accs['trmean_none']:.3f},"
                            f" under little {accs['trmean_little']:.3f},"
                            f" drop {drop:.3f} (needs >= 0.20)")


def test_criterion_5d_average_degraded_by_empire(desk_runs, report):
    accs, _ = desk_runs
    drop = accs["average_none"] - accs["average_empire"]
    ok = drop >= 0.20
    assert report("5d", ok, f"average clean {accs['average_none']:.3f},"
                            f" under empire {accs['average_empire']:.3f},"
                            f" drop {drop:.3f} (needs >= 0.20)")


# --- 6: fastest-k beats waiting for stragglers --------------------------------


def test_criterion_6_straggler_timing(report):
    N, f, k = 25, 8, 8
    workers = [
        WorkerSpec(id=i, honest=i < N - f,
                   delay_scale=0.2 if i < N - f else 0.001,
                   shard=Shard(owner=i, row_indices=np.array([0])))
        for i in range(N)
    ]
    streams = {i: RngStream(606, 2000 + i) for i in range(N)}
    kth_total = max_total = 0.0
    for _ in range(1000):
        arrivals = sample_arrivals(workers, streams)
        kth_total += arrivals[k - 1].arrival_time
        max_total += arrivals[-1].arrival_time
    ratio_sim = kth_total / max_total

    rnd = random.Random(909)
    oracle_kth = oracle_max = 0.0
    trials = 100_000
    for _ in range(trials):
        times = sorted([rnd.expovariate(1 / 0.2) for _ in range(N - f)]
                       + [rnd.expovariate(1 / 0.001) for _ in range(f)])
        oracle_kth += times[k - 1]
        oracle_max += times[-1]
    ratio_oracle = oracle_kth / oracle_max

    ok = ratio_sim <= 0.7 and abs(ratio_sim - ratio_oracle) <= 0.05
    assert report("6", ok, f"simulated wait ratio {ratio_sim:.4f},"
                           f" oracle {ratio_oracle:.4f} (cap 0.7, tol 0.05)")


# --- 7: byte-level reproducibility --------------------------------------------

_SMALL_CONFIG = """\
N = 5
f = 1
k = 2
T = 50
eta = 0.1
seed = 1
gar = "dstar"
attack = "none"

[dataset]
kind = "blobs"
n = 200
p = 3
classes = 2
"""


def test_criterion_7_determinism(tmp_path, report):
    config = tmp_path / "run.toml"
    config.write_text(_SMALL_CONFIG)
    outs = [str(tmp_path / name) for name in ("a", "b", "c")]
    assert main(["run", "--config", str(config), "--out", outs[0]]) == 0
    assert main(["run", "--config", str(config), "--out", outs[1]]) == 0
    assert main(["run", "--config", str(config), "--out", outs[2],
                 "--set", "seed=2"]) == 0
    same = (tmp_path / "a" / "metrics.csv").read_bytes()
    again = (tmp_path / "b" / "metrics.csv").read_bytes()
    other = (tmp_path / "c" / "metrics.csv").read_bytes()
    identical = same == again
    rows_differ = sum(
        1 for r1, r2 in zip(same.splitlines()[1:], other.splitlines()[1:]) if r1 != r2
    )
    ok = identical and rows_differ >= 1
    assert report("7", ok, f"equal seeds byte-identical: {identical},"
                           f" seed change altered {rows_differ} rows")


# --- 8: filtering scales linearly in N, krum quadratically ---------------------


def _filter_pass_time(N, d, inner, repeats=9):
    rng = np.random.Generator(np.random.Philox(key=np.array([88, N], dtype=np.uint64)))
    grads = [rng.normal(size=d) for _ in range(N)]
    g_v = np.asarray(rng.normal(size=d))
    th = compute_thresholds(g_v + 0.01 * np.asarray(rng.normal(size=d)), g_v)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            for g in grads:
                filter_gradient(g, g_v, th)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def _krum_time(N, d, inner, repeats=5):
    rng = np.random.Generator(np.random.Philox(key=np.array([89, N], dtype=np.uint64)))
    grads = [rng.normal(size=d) for _ in range(N)]
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            aggregate_krum(grads, f=10)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def test_criterion_8_aggregation_scaling(report):
    d = 10_000
    filter_factor = _filter_pass_time(100, d, inner=40) / _filter_pass_time(50, d, inner=40)
    krum_factor = _krum_time(100, d, inner=3) / _krum_time(50, d, inner=3)
    ok = 1.5 <= filter_factor <= 3.0 and krum_factor > 3.0
    assert report("8", ok, f"filter time factor {filter_factor:.2f} (want [1.5, 3.0]),"
                           f" krum factor {krum_factor:.2f} (want > 3.0)")
