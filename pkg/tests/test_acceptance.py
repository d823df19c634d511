"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line.

Timed checks run after the session fixture in ``conftest`` has compiled (or
loaded) every numba kernel, so JIT time is excluded.
"""

import itertools
import math
import os
import statistics
import time

import numpy as np
import pytest

from fastdpc.approx import approx_dpc_run
from fastdpc.cli import run as cli_run
from fastdpc.core import DpcParams, rand_index
from fastdpc.datasets import generate_gaussian, generate_random_walk
from fastdpc.exdpc import exdpc_densities, exdpc_run
from fastdpc.grid import build_grid, sampled_side
from fastdpc.kdtree import KdTree
from fastdpc.sapprox import first_phase_dependents, s_approx_run, sampled_densities, second_phase_dependents
from fastdpc.scan import scan_run
from fastdpc.scheduler import CostedTask, greedy_partition, makespan

WALK_DCUT = 50.0
WALK_PARAMS = dict(d_cut=WALK_DCUT, rho_min=5.0, delta_min=10 * WALK_DCUT)


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok

    return emit


def median_time(fn, repeats=3):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


@pytest.fixture(scope="module")
def walk_100k():
    return generate_random_walk(100_000, 2, seed=0)


def gaussian_suite():
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        k = int(rng.integers(3, 9))
        X, _, _ = generate_gaussian(k, int(rng.integers(800, 2000)), 2 + seed % 2, float(rng.uniform(500, 1500)),
                                    seed=seed, min_separation=10000)
        d_cut = float(rng.uniform(250, 600))
        yield X, DpcParams(d_cut=d_cut, rho_min=float(rng.integers(0, 4)), delta_min=float(rng.uniform(2, 10)) * d_cut)


def test_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    bad = []
    for i in range(52):
        rng = np.random.default_rng(i)
        n = int(rng.integers(100, 2001))
        d = [2, 3, 5, 8][i % 4]
        X = rng.normal(0, 100, (n, d)) if i % 2 else rng.uniform(0, 300, (n, d))
        d_cut = float(rng.uniform(0.05, 0.4)) * 100 * math.sqrt(d)
        params = DpcParams(d_cut=d_cut, rho_min=float(rng.integers(0, 5)), delta_min=2.5 * d_cut)
        ex, oracle = exdpc_run(X, params), scan_run(X, params)
        ok = (
            np.array_equal(ex.profile.rho, oracle.profile.rho)
            and np.array_equal(ex.profile.dep, oracle.profile.dep)
            and np.allclose(ex.profile.delta, oracle.profile.delta, rtol=0, atol=1e-9)
            and np.array_equal(ex.clustering.labels, oracle.clustering.labels)
        )
        if not ok:
            bad.append(i)
    elapsed = time.perf_counter() - t0
    assert verdict("oracle equivalence", not bad and elapsed < 60,
                   f"52 datasets, mismatches={bad}, {elapsed:.1f}s (limit 60s)")


def test_center_guarantee(verdict):
    t0 = time.perf_counter()
    bad = []
    for i, (X, params) in enumerate(gaussian_suite()):
        a = np.sort(approx_dpc_run(X, params).clustering.centers)
        e = np.sort(exdpc_run(X, params).clustering.centers)
        if not np.array_equal(a, e):
            bad.append(i)
    elapsed = time.perf_counter() - t0
    assert verdict("approx centers equal exact centers", not bad and elapsed < 60,
                   f"20 mixtures, mismatches={bad}, {elapsed:.1f}s (limit 60s)")


def test_exact_rho_and_long_delta(verdict):
    bad = []
    for i, (X, params) in enumerate(gaussian_suite()):
        ap, oracle = approx_dpc_run(X, params), scan_run(X, params)
        long = oracle.profile.delta > params.d_cut
        ok = (
            np.array_equal(ap.profile.rho, oracle.profile.rho)
            and np.array_equal(ap.profile.dep[long], oracle.profile.dep[long])
            and np.allclose(ap.profile.delta[long], oracle.profile.delta[long], rtol=0, atol=1e-9)
        )
        if not ok:
            bad.append(i)
    assert verdict("approx exact rho and long delta", not bad, f"20 mixtures, mismatches={bad}")


def test_accuracy_desk_scale(verdict):
    t0 = time.perf_counter()
    scores = {"approx": [], "s-approx eps=0.2": [], "s-approx eps=1.0": []}
    for seed in range(5):
        X, _, _ = generate_gaussian(15, 5000, 2, 2500.0, seed=seed, min_separation=10000)
        base = dict(d_cut=800.0, rho_min=2.0, delta_min=5000.0)
        ref = exdpc_run(X, DpcParams(**base)).clustering.labels
        scores["approx"].append(rand_index(ref, approx_dpc_run(X, DpcParams(**base)).clustering.labels))
        for eps in (0.2, 1.0):
            got = s_approx_run(X, DpcParams(epsilon=eps, **base)).clustering.labels
            scores[f"s-approx eps={eps}"].append(rand_index(ref, got))
    med = {k: statistics.median(v) for k, v in scores.items()}
    elapsed = time.perf_counter() - t0
    ok = med["approx"] >= 0.98 and med["s-approx eps=0.2"] >= 0.98 and med["s-approx eps=1.0"] >= 0.95
    detail = ", ".join(f"{k} {v:.4f}" for k, v in med.items())
    assert verdict("rand index vs exact on 15 gaussians", ok and elapsed < 120, f"{detail}, {elapsed:.1f}s")


def test_sapprox_distance_bounds(verdict):
    worst_pick = worst_cell = 0.0
    for i in range(20):
        rng = np.random.default_rng(200 + i)
        d = [2, 3, 4][i % 3]
        eps = [0.2, 0.5, 1.0, 1.5][i % 4]
        X = rng.normal(0, 80, (2000, d))
        d_cut = float(rng.uniform(5, 25))
        grid = build_grid(X, sampled_side(d_cut, d, eps))
        rho = sampled_densities(X, KdTree(X), grid, d_cut)
        prof, _ = first_phase_dependents(X, grid, rho, d_cut, eps)
        has = prof.dep >= 0
        dist = np.linalg.norm(X[has] - X[prof.dep[has]], axis=1)
        picked = ~np.isnan(rho[has])
        if picked.any():
            worst_pick = max(worst_pick, (dist[picked] / ((1 + eps) * d_cut)).max())
        if (~picked).any():
            worst_cell = max(worst_cell, (dist[~picked] / (eps * d_cut)).max())
    ok = worst_pick <= 1.0 and worst_cell <= 1.0 + 1e-12
    assert verdict("s-approx distance bounds", ok,
                   f"20 instances, max first-phase ratio {worst_pick:.3f}, max intra-cell ratio {worst_cell:.3f}")


def test_pruning_lossless(verdict):
    checked = mismatches = 0
    for i in range(20):
        rng = np.random.default_rng(300 + i)
        X = rng.normal(0, 100, (2500, 2 + i % 2))
        d_cut, eps = float(rng.uniform(3, 10)), float(rng.uniform(0.2, 1.0))
        grid = build_grid(X, sampled_side(d_cut, X.shape[1], eps))
        rho = sampled_densities(X, KdTree(X), grid, d_cut)
        prof, heads = first_phase_dependents(X, grid, rho, d_cut, eps)
        picked = grid.pstar
        heads, _ = second_phase_dependents(X, picked, heads, prof)
        for p in heads:
            cand = picked[rho[picked] > rho[p]]
            if len(cand):
                d2 = ((X[cand] - X[p]) ** 2).sum(axis=1)
                expect = int(cand[d2 == d2.min()].min())
            else:
                expect = -1
            checked += 1
            mismatches += int(prof.dep[p] != expect)
    assert verdict("second-phase pruning lossless", mismatches == 0, f"{checked} heads, {mismatches} mismatches")


def test_kdtree_and_grid(verdict):
    failures = []
    for d in (2, 3, 5, 8):
        rng = np.random.default_rng(d)
        X = rng.uniform(0, 100, (5000, d))
        tree = KdTree(X)
        for _ in range(1000):
            q = rng.uniform(-5, 105, d)
            r = rng.uniform(0, 40)
            dist2 = ((X - q) ** 2).sum(axis=1)
            if not np.array_equal(tree.range_search(q, r), np.nonzero(np.sqrt(dist2) < r)[0]):
                failures.append(("range", d))
                break
            if tree.nearest_neighbor(q) != int(np.nonzero(dist2 == dist2.min())[0].min()):
                failures.append(("nn", d))
                break
        g = build_grid(X, 7.5)
        if not (np.array_equal(np.sort(g.members), np.arange(len(X))) and (g.sizes > 0).all()):
            failures.append(("grid", d))
    assert verdict("kd-tree queries and grid partition", not failures,
                   f"d in 2,3,5,8 with 1000 range and NN queries each, failures={failures}")


def test_scheduler_bounds(verdict):
    violations = 0
    rng = np.random.default_rng(7)
    for _ in range(200):
        costs = rng.uniform(0, 100, int(rng.integers(1, 80))).tolist()
        t = int(rng.integers(1, 17))
        span = makespan(greedy_partition([CostedTask(i, c) for i, c in enumerate(costs)], t), costs)
        lo, hi = max(max(costs), sum(costs) / t), max(costs) + sum(costs) / t
        violations += not (lo - 1e-9 <= span <= hi + 1e-9)
    costs = [5, 4, 3, 3, 3]
    span = makespan(greedy_partition([CostedTask(i, c) for i, c in enumerate(costs)], 2), costs)
    opt = min(
        max(sum(c for c, s in zip(costs, side) if s), sum(c for c, s in zip(costs, side) if not s))
        for side in itertools.product((0, 1), repeat=5)
    )
    ok = violations == 0 and span == 10 and opt == 9 and span / opt <= 1.5
    assert verdict("scheduler bounds", ok, f"200 vectors, {violations} violations; [5,4,3,3,3] t=2 gives {span} vs OPT {opt}")


def test_thread_determinism(verdict, tmp_path):
    X, _, _ = generate_gaussian(8, 6000, 2, 1500.0, seed=11, min_separation=12000)
    data = tmp_path / "points.csv"
    np.savetxt(data, X, delimiter=",", fmt="%.17g")
    differing = []
    for algo in ("scan", "ex", "approx", "s-approx"):
        if algo == "scan":
            src = ["--generate", "gaussian", "--n", "1500", "--k", "5", "--seed", "3"]
        else:
            src = ["--input", str(data)]
        files = []
        for t in (1, 2, 8):
            out = tmp_path / f"{algo}-{t}.csv"
            code = cli_run(["--algo", algo, *src, "--dcut", "500", "--epsilon", "0.5", "--threads", str(t),
                            "--out-labels", str(out)], stdout=open(tmp_path / "log", "w"))
            assert code == 0
            files.append(out.read_bytes())
        if len(set(files)) != 1:
            differing.append(algo)
    assert verdict("label files identical for threads 1, 2, 8", not differing, f"differing algorithms: {differing}")


def test_parallel_speedup(verdict, walk_100k):
    X = walk_100k
    t0 = time.perf_counter()
    speedups = {}
    for name, fn in (("approx", approx_dpc_run), ("s-approx", s_approx_run)):
        one = median_time(lambda: fn(X, DpcParams(epsilon=0.6, threads=1, **WALK_PARAMS)))
        four = median_time(lambda: fn(X, DpcParams(epsilon=0.6, threads=4, **WALK_PARAMS)))
        speedups[name] = one / four
    tree = KdTree(X)
    one = median_time(lambda: exdpc_densities(X, tree, WALK_DCUT, threads=1))
    four = median_time(lambda: exdpc_densities(X, tree, WALK_DCUT, threads=4))
    speedups["ex density phase"] = one / four
    elapsed = time.perf_counter() - t0
    cores = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    detail = ", ".join(f"{k} {v:.2f}x" for k, v in speedups.items())
    ok = all(v >= 2.0 for v in speedups.values()) and elapsed < 300
    assert verdict("4-thread speedup >= 2x", ok, f"{detail} on {cores} available core(s), {elapsed:.0f}s")


def test_sapprox_scaling(verdict):
    times = {}
    for n in (50_000, 100_000, 200_000):
        X = generate_random_walk(n, 2, seed=0)
        times[n] = median_time(lambda: s_approx_run(X, DpcParams(epsilon=0.6, threads=1, **WALK_PARAMS)))
    ratios = [times[100_000] / times[50_000], times[200_000] / times[100_000]]
    detail = ", ".join(f"n={n} {t:.3f}s" for n, t in times.items())
    assert verdict("s-approx near-linear scaling", max(ratios) <= 2.5,
                   f"{detail}; doubling ratios {ratios[0]:.2f}, {ratios[1]:.2f} (limit 2.5)")


def test_epsilon_trend(verdict, walk_100k):
    times = {}
    for eps in (0.2, 0.6, 1.0):
        times[eps] = median_time(lambda: s_approx_run(walk_100k, DpcParams(epsilon=eps, threads=1, **WALK_PARAMS)))
    vals = list(times.values())
    ok = all(b <= a * 1.10 for a, b in zip(vals, vals[1:]))
    assert verdict("s-approx runtime non-increasing in epsilon", ok,
                   ", ".join(f"eps={e} {t:.3f}s" for e, t in times.items()))


def test_relative_ordering(verdict, walk_100k):
    p = DpcParams(epsilon=0.6, threads=1, **WALK_PARAMS)
    big = {
        "s-approx": median_time(lambda: s_approx_run(walk_100k, p)),
        "approx": median_time(lambda: approx_dpc_run(walk_100k, p)),
        "ex": median_time(lambda: exdpc_run(walk_100k, p)),
    }
    small_X = generate_random_walk(20_000, 2, seed=0)
    small = {
        "s-approx": median_time(lambda: s_approx_run(small_X, p)),
        "approx": median_time(lambda: approx_dpc_run(small_X, p)),
        "ex": median_time(lambda: exdpc_run(small_X, p)),
        "scan": median_time(lambda: scan_run(small_X, p)),
    }
    ok = big["s-approx"] <= big["approx"] <= big["ex"]
    ok &= small["s-approx"] <= small["approx"] <= small["ex"] <= small["scan"]
    detail = "n=1e5 " + ", ".join(f"{k} {v:.3f}s" for k, v in big.items())
    detail += "; n=2e4 " + ", ".join(f"{k} {v:.3f}s" for k, v in small.items())
    assert verdict("runtime ordering s-approx <= approx <= ex <= scan", ok, detail)
