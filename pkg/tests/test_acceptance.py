"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS/FAIL
line per criterion as it completes. Every tolerance is pinned here;
expected values come from the independent oracles in oracles.py or
from closed-form computation, never from the code paths under test.
"""

import time

import numpy as np
import pytest

from sever.attacks import AttackSpec, attack_ridge
from sever.core import SeverConfig, run_sever
from sever.data import Dataset, gen_regression
from sever.data import test_error as eval_error
from sever.filtering import (
    FilterConfig,
    ScoreReport,
    compute_scores,
    randomized_filter,
    robust_mean,
)
from sever.learners import fit_ridge_closed_form
from sever.linalg import top_right_singular_vector
from sever.losses import LossModel, grad, loss
from sever.sweep import run_sweep

from oracles import finite_difference_grad, top_singular_value_oracle


def ridge_learner(model, data):
    return fit_ridge_closed_form(data, model.lam)


def report(num, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    print(f"criterion {num:2d} [{verdict}] {name}: {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


class TestCriterion1Gradients:
    def test_finite_difference_checks(self):
        t0 = time.perf_counter()
        worst = 0.0
        rng = np.random.default_rng(20240601)
        for kind in ("squared", "hinge", "logistic"):
            model = LossModel(kind)
            checked = 0
            while checked < 50:
                d = int(rng.integers(1, 6))
                w = rng.standard_normal(d)
                x = rng.standard_normal(d)
                y = (
                    rng.standard_normal()
                    if kind == "squared"
                    else float(rng.choice([-1.0, 1.0]))
                )
                if kind == "hinge" and abs(1.0 - y * (w @ x)) <= 1e-3:
                    continue
                g = grad(model, w, x, y)
                fd = finite_difference_grad(lambda ww: loss(model, ww, x, y), w)
                rel = np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(g))
                worst = max(worst, rel)
                checked += 1
        elapsed = time.perf_counter() - t0
        ok = worst <= 1e-5 and elapsed < 1.0
        report(1, "gradient correctness", ok,
               f"max rel err {worst:.2e} (tol 1e-5), {elapsed:.2f}s (limit 1s)")


class TestCriterion2SpectralOracle:
    def test_power_iteration_matches_jacobi(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(77)
        worst = 0.0
        for k in range(100):
            rows = int(rng.integers(1, 11))
            cols = int(rng.integers(1, 11))
            scale = 10.0 ** rng.uniform(-2, 2)
            m = scale * rng.standard_normal((rows, cols))
            res = top_right_singular_vector(m, seed=k)
            expected = top_singular_value_oracle(m)
            rel = abs(res.sigma - expected) / max(expected, 1e-300)
            worst = max(worst, rel)
        elapsed = time.perf_counter() - t0
        ok = worst <= 1e-6 and elapsed < 5.0
        report(2, "spectral oracle", ok,
               f"max rel err {worst:.2e} (tol 1e-6), {elapsed:.2f}s (limit 5s)")


class TestCriterion3FilterLaw:
    def test_removal_frequencies(self):
        t0 = time.perf_counter()
        scores = np.array([4.0, 2.0, 1.0, 1.0])
        want = np.array([1.0, 0.5, 0.25, 0.25])
        rep = ScoreReport(np.arange(4), scores, np.array([1.0]), 0.0)
        cfg = FilterConfig(sigma=0.0)
        rng = np.random.default_rng(31415)
        trials = 100_000
        counts = np.zeros(4)
        for _ in range(trials):
            decision = randomized_filter(rep, cfg, rng=rng)
            counts[decision.removed] += 1
        freq = counts / trials
        dev = np.max(np.abs(freq - want))
        elapsed = time.perf_counter() - t0
        ok = dev <= 0.01 and elapsed < 10.0
        report(3, "filter law", ok,
               f"max |freq - law| {dev:.4f} (tol 0.01), {elapsed:.1f}s (limit 10s)")


class TestCriterion4Supermartingale:
    def test_good_removals_bounded_by_bad(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2718)
        sigma = 0.1
        cfg = FilterConfig(sigma=sigma)
        trials = 10_000
        removed_good = np.zeros(trials)
        removed_bad = np.zeros(trials)
        for t in range(trials):
            good = sigma * rng.standard_normal((50, 2))
            bad = np.array([3.0, 0.0]) + 0.01 * rng.standard_normal((10, 2))
            rows = np.vstack([good, bad])
            rep = compute_scores(rows, seed=rng)
            decision = randomized_filter(rep, cfg, rng=rng)
            removed_good[t] = np.sum(decision.removed < 50)
            removed_bad[t] = np.sum(decision.removed >= 50)
        se = np.sqrt(removed_good.var() / trials + removed_bad.var() / trials)
        lhs, rhs = removed_good.mean(), removed_bad.mean() + 3.0 * se
        elapsed = time.perf_counter() - t0
        ok = lhs <= rhs and elapsed < 30.0
        report(4, "supermartingale", ok,
               f"mean good removed {lhs:.3f} <= bad {removed_bad.mean():.3f} "
               f"+ 3se {3*se:.3f}, {elapsed:.1f}s (limit 30s)")


class TestCriterion5AttackValidity:
    def test_alpha_beta_attack_zeroes_fit(self):
        train, _, w_star = gen_regression(300, 10, 0.1, seed=5, n_test=10)
        spec = AttackSpec(
            eps=0.1, kind="ridge_alpha_beta", alpha=2.0, beta=2.0,
            noise_scale=0.0, seed=6,
        )
        corrupted = attack_ridge(train, spec)
        w = fit_ridge_closed_form(corrupted, 1e-8)
        ratio = np.linalg.norm(w) / np.linalg.norm(w_star)
        ok = ratio < 1e-3
        report(5, "attack validity", ok,
               f"||fit|| / ||w*|| = {ratio:.2e} (tol 1e-3)")


class TestCriterion6RobustMean:
    def test_planted_outliers_over_seeds(self):
        t0 = time.perf_counter()
        worst_robust, best_naive = 0.0, np.inf
        for seed in range(5):
            rng = np.random.default_rng(1000 + seed)
            clean = rng.standard_normal((500, 10))
            bad = np.tile([20.0] + [0.0] * 9, (50, 1))
            pts = np.vstack([clean, bad])
            naive = float(np.linalg.norm(pts.mean(axis=0)))
            res = robust_mean(pts, 1.0, 0.1, FilterConfig(sigma=1.0, seed=seed))
            robust = float(np.linalg.norm(res.mean))
            worst_robust = max(worst_robust, robust)
            best_naive = min(best_naive, naive)
        elapsed = time.perf_counter() - t0
        ok = worst_robust < 1.0 and best_naive > 1.5 and elapsed < 10.0
        report(6, "robust mean", ok,
               f"worst robust err {worst_robust:.3f} (<1.0), naive err "
               f">= {best_naive:.3f} (>1.5), {elapsed:.1f}s (limit 10s)")


REGRESSION_SWEEP = """\
[sweep]
task = regression
n = 1000
n_test = 200
d = 20
noise = 0.1
trials = 3
seed = 20240601
eps = 0.02, 0.04, 0.06, 0.08, 0.10
defenses = uncorrupted, sever, l2, loss, gradientCentered

[attack]
kind = ridge_alpha_beta
alphas = 0.5, 1.0, 2.0, 4.0

[defense]
rounds = 4
p_mode = half_eps

[learner]
kind = ridge
lambda = 0.01
"""


class TestCriterion7RegressionShape:
    def test_epsilon_sweep_shape(self, tmp_path):
        t0 = time.perf_counter()
        cfg_path = tmp_path / "reg.ini"
        cfg_path.write_text(REGRESSION_SWEEP)
        result = run_sweep(cfg_path)
        eps_grid = (0.02, 0.04, 0.06, 0.08, 0.10)
        attacks = result.attacks()

        def clean(eps):
            vals = [
                r.test_error
                for r in result.records
                if r.eps == eps and r.defense == "uncorrupted"
            ]
            return float(np.median(vals))

        sever_ok = all(
            result.worst_median(eps, "sever") <= 1.5 * clean(eps) for eps in eps_grid
        )
        baseline_fail = {}
        for name in ("l2", "loss", "gradientCentered"):
            baseline_fail[name] = any(
                result.worst_median(eps, name) > 2.0 * clean(eps)
                for eps in eps_grid
                if eps >= 0.04
            )
        elapsed = time.perf_counter() - t0
        worst_ratio = max(
            result.worst_median(eps, "sever") / clean(eps) for eps in eps_grid
        )
        ok = sever_ok and all(baseline_fail.values()) and elapsed < 300.0
        report(7, "regression sweep shape", ok,
               f"sever worst ratio {worst_ratio:.2f}x clean (<=1.5x); baselines "
               f"exceed 2x at some eps>=0.04: {baseline_fail}; "
               f"{elapsed:.0f}s (limit 300s), attacks={len(attacks)}")


CLASSIFICATION_SWEEP = """\
[sweep]
task = classification
n = 1000
n_test = 2000
d = 20
noise = 0.0
trials = 1
seed = 20240601
eps = 0.005, 0.01, 0.02, 0.03
defenses = uncorrupted, sever, loss

[attack]
kind = label_flip_cluster
noise_scale = 0.05
cluster_geometry = 0.5:2, 1:4, 1.75:6, 2:6
classes = 1, -1

[defense]
rounds = 2
p_mode = class_formula

[learner]
kind = svm
lambda = 0.001
gamma_target = 1e-3
max_epochs = 400
step_size = 0.5
"""


class TestCriterion8ClassificationShape:
    def test_label_flip_sweep_shape(self, tmp_path):
        t0 = time.perf_counter()
        cfg_path = tmp_path / "svm.ini"
        cfg_path.write_text(CLASSIFICATION_SWEEP)
        result = run_sweep(cfg_path)
        eps_grid = (0.005, 0.01, 0.02, 0.03)
        attacks = result.attacks()
        assert len(attacks) >= 8

        def clean(eps):
            vals = [
                r.test_error
                for r in result.records
                if r.eps == eps and r.defense == "uncorrupted"
            ]
            return float(np.median(vals))

        margins = {
            eps: result.worst_median(eps, "sever") - clean(eps) for eps in eps_grid
        }
        sever_ok = all(m <= 0.04 for m in margins.values())

        eps = 0.03
        a_star = max(attacks, key=lambda a: result.median_error(eps, a, "loss"))
        gap = result.median_error(eps, a_star, "loss") - result.median_error(
            eps, a_star, "sever"
        )
        elapsed = time.perf_counter() - t0
        ok = sever_ok and gap >= 0.05 and elapsed < 600.0
        report(8, "classification sweep shape", ok,
               f"sever worst-case margins {max(margins.values())*100:.1f}pp "
               f"(<=4pp); gap under loss-worst attack ({a_star}) "
               f"{gap*100:.1f}pp (>=5pp); {elapsed:.0f}s (limit 600s)")


class TestCriterion9MultiRoundUnmasking:
    def test_hidden_outliers_need_extra_round(self):
        # Group A drags the fit; group B is consistent with the dragged
        # fit (zero residual, hence invisible) until A is removed.
        rng = np.random.default_rng(1234)
        n_clean, d = 200, 2
        X = rng.standard_normal((n_clean, d))
        w_true = np.array([1.0, 0.0])
        y = X @ w_true + 0.01 * rng.standard_normal(n_clean)
        lam = 0.01
        model = LossModel("squared", lam=lam)

        n_a, n_b = 10, 30
        X_a = np.tile([0.0, 4.0], (n_a, 1)) + 0.02 * rng.standard_normal((n_a, 2))
        y_a = np.full(n_a, -8.0)
        w_dragged = fit_ridge_closed_form(
            Dataset(np.vstack([X, X_a]), np.concatenate([y, y_a])), lam
        )
        X_b = np.tile([0.0, -4.0], (n_b, 1)) + 0.02 * rng.standard_normal((n_b, 2))
        y_b = X_b @ w_dragged  # exactly consistent with the corrupted fit
        prov = np.concatenate([np.zeros(n_clean, bool), np.ones(n_a + n_b, bool)])
        data = Dataset(
            np.vstack([X, X_a, X_b]),
            np.concatenate([y, y_a, y_b]),
            provenance=prov,
        )
        n_injected = n_a + n_b
        p = 16.0 / data.n

        outcomes = {}
        for r in (2, 3):
            cfg = SeverConfig(variant="practical", p_fraction=p, num_rounds=r, seed=5)
            out = run_sever(model, data, ridge_learner, cfg)
            bad_per_round = [int(prov[ids].sum()) for ids in out.removed_per_round]
            outcomes[r] = bad_per_round

        removed_r2 = sum(outcomes[2])
        removed_r3 = sum(outcomes[3])
        left_after_r2 = n_injected - removed_r2
        increasing = outcomes[3][0] < outcomes[3][1]
        ok = (
            left_after_r2 >= 0.2 * n_injected
            and removed_r3 >= 0.9 * n_injected
            and increasing
        )
        report(9, "multi-round unmasking", ok,
               f"r=2 leaves {left_after_r2}/{n_injected} outliers "
               f"(>=20%), r=3 removes {removed_r3}/{n_injected} (>=90%), "
               f"per-round bad counts {outcomes[3][:2]} increasing")


DETERMINISM_SWEEP = """\
[sweep]
task = regression
n = 150
n_test = 50
d = 5
noise = 0.1
trials = 2
seed = 99
eps = 0.04, 0.08
defenses = uncorrupted, sever, loss, ransac

[attack]
kind = ridge_alpha_beta
alphas = 1.0, 3.0

[defense]
rounds = 3
p_mode = half_eps

[learner]
kind = ridge
lambda = 0.01
"""


class TestCriterion10Determinism:
    def test_sweep_outputs_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "det.ini"
        cfg_path.write_text(DETERMINISM_SWEEP)
        run_sweep(cfg_path, out_dir=tmp_path / "a")
        run_sweep(cfg_path, out_dir=tmp_path / "b")
        same = all(
            (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
            for name in ("results.csv", "summary.csv", "worst_case.csv")
        )
        report(10, "sweep determinism", same,
               "results/summary/worst_case CSVs byte-identical across runs")


class TestCriterion11Termination:
    def test_theoretical_mode_fuzz(self):
        rng = np.random.default_rng(4242)
        max_rounds_seen = 0
        worst_gamma = 0.0
        for k in range(12):
            d = int(rng.integers(2, 6))
            X = rng.standard_normal((50, d))
            w_true = rng.standard_normal(d)
            y = X @ w_true + 0.1 * rng.standard_normal(50)
            n_bad = int(rng.integers(3, 8))
            y[:n_bad] += rng.choice([-1.0, 1.0], size=n_bad) * rng.uniform(20, 60)
            data = Dataset(X, y)
            model = LossModel("squared", lam=0.05)
            # calibrate the spread bound from the uncorrupted portion
            clean = Dataset(X[n_bad:], y[n_bad:])
            w_clean = fit_ridge_closed_form(clean, 0.05)
            from sever.losses import grad_rows

            rows = grad_rows(model, w_clean, clean.X, clean.y)
            sigma = 1.5 * compute_scores(rows, seed=k).sigma_hat + 0.1
            cfg = SeverConfig(variant="theoretical", sigma=sigma, seed=9000 + k)
            out = run_sever(model, data, ridge_learner, cfg)
            max_rounds_seen = max(max_rounds_seen, out.rounds_run)
            worst_gamma = max(worst_gamma, out.achieved_gamma)
        gamma_budget = 1e-8 + 1e-9  # closed-form learner tolerance + slack
        ok = max_rounds_seen <= 50 and worst_gamma <= gamma_budget
        report(11, "termination", ok,
               f"max rounds {max_rounds_seen} (<=50), worst retained-set "
               f"criticality {worst_gamma:.2e} (<= {gamma_budget:.0e})")
