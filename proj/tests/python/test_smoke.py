"""End-to-end smoke tests for the python bindings."""

import math

import pytest

import morec


def small_data(seed=11):
    cfg = morec.synth_config(
        n_users=60,
        n_items=40,
        n_interactions=900,
        n_categories=3,
        zipf_exponent=0.8,
        latent_dim=4,
    )
    synth = morec.synth_generate(cfg, seed)
    ds = morec.leave_one_out_split(morec.kcore_filter(synth.interactions, 2))
    cat = morec.build_catalog(synth.items, ds, 10)
    return ds, cat


def test_synth_determinism():
    cfg = morec.synth_config(n_users=20, n_items=15, n_interactions=120)
    a = morec.synth_generate(cfg, 7)
    b = morec.synth_generate(cfg, 7)
    assert a.interactions.tuples() == b.interactions.tuples()
    c = morec.synth_generate(cfg, 8)
    assert a.interactions.tuples() != c.interactions.tuples()


def test_pi_controller_reference_value():
    pi = morec.PiController(kp=0.01, ki=0.001, alpha_min=0.1, target_loss=0.2)
    alpha, err, err_sum = pi.step(0.2)
    assert alpha == pytest.approx(0.105)
    assert err == pytest.approx(0.0)
    assert err_sum == pytest.approx(0.0)


def test_pareto_frontier_matches_bruteforce():
    import random

    rng = random.Random(3)
    points = [[rng.randint(0, 5) for _ in range(3)] for _ in range(40)]
    maximize = [True, False, True]

    def dominates(a, b):
        adj = lambda p: [v if m else -v for v, m in zip(p, maximize)]
        x, y = adj(a), adj(b)
        return all(xi >= yi for xi, yi in zip(x, y)) and any(
            xi > yi for xi, yi in zip(x, y)
        )

    expected = [
        i
        for i, p in enumerate(points)
        if not any(dominates(q, p) for j, q in enumerate(points) if j != i)
    ]
    assert morec.pareto_frontier(points, maximize) == expected


def test_imp_against_reported_table_row():
    base = {"hit": 1.62, "rhit": 135.42, "pop_kl": 142.54, "min_hit": 0.91}
    sol = {"hit": 1.63, "rhit": 225.19, "pop_kl": 16.81, "min_hit": 1.05}
    assert morec.imp(base, sol) == pytest.approx(42.6247, abs=1e-3)


def test_pipeline_pretrain_continual_and_evaluate():
    ds, cat = small_data()
    assert ds.n_users > 0 and ds.n_train > 0 and ds.n_valid > 0

    cfg = morec.train_config(
        dim=8,
        learning_rate=0.01,
        n_negatives=4,
        batch_size=128,
        max_epochs=3,
        patience=3,
        seed=11,
    )
    model = morec.make_model(ds.n_users, ds.n_items, cfg.dim, True, 0.1, 11)
    model, converged_loss, epochs = morec.pretrain(model, ds, cat, cfg)
    assert len(epochs) >= 1
    assert math.isfinite(converged_loss) and converged_loss > 0

    report = morec.evaluate(model, ds, cat, morec.EvalSplit.test, 10)
    assert 0.0 <= report["hit"] <= 1.0
    assert report["pop_kl"] >= 0.0
    assert report["n_eval_users"] == ds.n_test

    cfg.objectives = [morec.Objective.accuracy, morec.Objective.revenue]
    cfg.rho = [1.0]
    cfg.max_epochs = 2
    model2, history, best_imp = morec.continual_train(model, ds, cat, cfg, converged_loss)
    assert len(history) == 2
    assert math.isfinite(best_imp)

    top = model2.topk(0, 5)
    assert len(top) == 5 and len(set(top)) == 5
