"""Acceptance suite: one PASS/FAIL line per numbered criterion.

Training-based criteria (6 to 9) run the desk preset end to end and take
several minutes each on one core.
"""
import time

import numpy as np
import pytest

from opshape import cli
from opshape.analysis import payoff_region, tft_line, zd_fit
from opshape.diffcore import fd_cross_hessian, fd_grad, value_cross_hessian, value_grad
from opshape.experiments import hyperparameters, train_mfos_params
from opshape.games import game_value, make_game, named_policy, probabilities
from opshape.learners import LolaLearner, NaiveLearner
from opshape.mfos.policy import MetaAgent, new_meta_policy
from opshape.mfos.ppo import critic_loss_and_grad, surrogate_loss_and_grad
from opshape.simulate import play
from oracles import brute_force_value, rel_err
from test_mfos import _batch, _fd_coords

IPD = make_game("ipd")
EVAL_BATCH = 1024


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, started=None):
        took = f" [{time.perf_counter() - started:.1f}s]" if started is not None else ""
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} | {detail}{took}")
        return ok
    return emit


def _train(game, opponent, seed):
    return train_mfos_params(game, opponent, "ga", seed, hyperparameters("ga", "desk")).params


def _versus(game, params, learner, seed=99):
    traj = play(game, MetaAgent(params), learner, 100, EVAL_BATCH, np.random.default_rng(seed))
    return traj.mean_returns()


def test_c01_exact_values_match_propagation(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for name in ("ipd", "imp"):
        g = make_game(name)
        for _ in range(50):
            la, lb = rng.normal(0, 2, 5), rng.normal(0, 2, 5)
            va, vb = game_value(g, la, lb)
            oa, ob = brute_force_value(g.payoff_a, g.payoff_b, la, lb, g.discount, 2000)
            worst = max(worst, abs(va - oa), abs(vb - ob))
    took = time.perf_counter() - t0
    ok = worst < 1e-6 and took < 10
    assert report(1, ok, f"100 pairs, max |analytic - oracle| = {worst:.2e} (tol 1e-6), {took:.1f}s < 10s")


def test_c02_derivatives_match_finite_differences(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    g_err = h_err = 0.0
    for name in ("ipd", "imp", "chicken"):
        g = make_game(name)
        for _ in range(10):
            la, lb = rng.standard_normal(5), rng.standard_normal(5)
            for v, w in (("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")):
                g_err = max(g_err, rel_err(value_grad(g, la, lb, v, w), fd_grad(g, la, lb, v, w, h=1e-5)))
            for v in ("a", "b"):
                h_err = max(h_err, np.abs(value_cross_hessian(g, la, lb, v) - fd_cross_hessian(g, la, lb, v)).max())
    p = new_meta_policy(IPD, rng, critic=True)
    p.log_std = rng.normal(0, 0.2, 5)
    b = _batch(p, rng)
    _, dactor, _ = surrogate_loss_and_grad(p, b, clip=0.2, entropy=0.01)
    idx = rng.choice(p.actor.size, 50, replace=False)
    fd = _fd_coords(lambda t: surrogate_loss_and_grad(p.copy(actor=t), b, 0.2, 0.01)[0], p.actor, idx)
    ppo_err = rel_err(dactor[idx], fd)
    _, dcritic = critic_loss_and_grad(p, b)
    idx = rng.choice(p.critic.size, 50, replace=False)
    fd = _fd_coords(lambda t: critic_loss_and_grad(p.copy(critic=t), b)[0], p.critic, idx)
    ppo_err = max(ppo_err, rel_err(dcritic[idx], fd))
    took = time.perf_counter() - t0
    ok = g_err < 1e-5 and h_err < 1e-4 and ppo_err < 1e-4 and took < 60
    assert report(2, ok, f"grad rel {g_err:.1e} (<1e-5), cross-Hessian max {h_err:.1e} (<1e-4), "
                         f"PPO rel {ppo_err:.1e} (<1e-4)", t0)


def test_c03_naive_pair_defects(report):
    t0 = time.perf_counter()
    va, vb = play(IPD, NaiveLearner(), NaiveLearner(), 100, 512, np.random.default_rng(3)).mean_returns()
    ok = -2.05 <= va <= -1.85 and -2.05 <= vb <= -1.85
    assert report(3, ok, f"NL/NL returns {va:.3f}, {vb:.3f} (band [-2.05, -1.85])", t0)


def test_c04_lola_dynamics(report):
    t0 = time.perf_counter()
    la, lb = play(IPD, LolaLearner(), LolaLearner(), 100, 512, np.random.default_rng(4)).mean_returns()
    lo, nl = play(IPD, LolaLearner(), NaiveLearner(), 100, 512, np.random.default_rng(5)).mean_returns()
    ok = (-1.3 <= la <= -0.95 and -1.3 <= lb <= -0.95 and lo >= nl
          and -1.5 <= lo <= -1.1 and -1.75 <= nl <= -1.35)
    assert report(4, ok, f"LOLA/LOLA {la:.3f}, {lb:.3f}; LOLA/NL {lo:.3f} vs {nl:.3f}", t0)


def test_c05_chicken_lola_catastrophe(report):
    t0 = time.perf_counter()
    va, vb = play(make_game("chicken"), LolaLearner(), LolaLearner(), 100, 512,
                  np.random.default_rng(6)).mean_returns()
    ok = (va + vb) / 2 <= -70
    assert report(5, ok, f"Chicken LOLA/LOLA mean {(va + vb) / 2:.2f} (<= -70)", t0)


def test_c06_mfos_exploits_naive_learner_in_ipd(report):
    t0 = time.perf_counter()
    m, nl = _versus(IPD, _train(IPD, "nl", 0), NaiveLearner())
    ok = m >= -0.9 and nl <= -1.8
    assert report(6, ok, f"IPD M-FOS {m:.3f} (>= -0.9), NL {nl:.3f} (<= -1.8)", t0)


def test_c07_mfos_wins_matching_pennies(report):
    t0 = time.perf_counter()
    imp = make_game("imp")
    m, _ = _versus(imp, _train(imp, "nl", 0), NaiveLearner())
    assert report(7, m >= 0.08, f"IMP M-FOS {m:.3f} (>= 0.08)", t0)


def test_c08_mfos_exploits_lola(report):
    t0 = time.perf_counter()
    m, lola = _versus(IPD, _train(IPD, "lola", 0), LolaLearner())
    ok = m >= -1.0 and lola <= -1.6 and m - lola >= 0.4
    assert report(8, ok, f"IPD M-FOS {m:.3f} (>= -1.0), LOLA {lola:.3f} (<= -1.6), gap {m - lola:.3f} (>= 0.4)",
                  t0)


def test_c09_meta_self_play_reaches_tit_for_tat(report):
    t0 = time.perf_counter()
    passed, lines = 0, []
    for seed in range(3):
        params = _train(IPD, "mfos", seed)
        traj = play(IPD, MetaAgent(params), MetaAgent(params), 100, EVAL_BATCH, np.random.default_rng(seed))
        va, vb = traj.mean_returns()
        final = probabilities(np.concatenate([traj.logits_a[:, -1], traj.logits_b[:, -1]]))
        cc, dd = final[:, 1].mean(), final[:, 4].mean()
        ok = min(va, vb) >= -1.3 and abs(va - vb) <= 0.15 and cc >= 0.8 and dd <= 0.4
        passed += ok
        lines.append(f"seed {seed}: {va:.3f}/{vb:.3f} P(C|CC)={cc:.2f} P(C|DD)={dd:.2f} {'ok' if ok else 'miss'}")
    assert report(9, passed >= 2, f"{passed}/3 seeds pass (need 2); " + "; ".join(lines), t0)


def test_c10_zero_determinant_lines(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    alld = zd_fit(payoff_region(IPD, named_policy("alld"), 4096, rng))
    tft = zd_fit(payoff_region(IPD, named_policy("tft"), 4096, rng))
    slope, intercept = tft_line(IPD.discount)
    # slope one and intercept zero hold exactly once payoffs stop being discounted
    limit = zd_fit(payoff_region(make_game("ipd", discount=1 - 1e-9), named_policy("tft"), 4096, rng))
    ok = (alld.r2 > 0.95 and tft.r2 > 0.95
          and abs(limit.slope - 1) < 1e-6 and abs(limit.intercept) < 1e-6
          and abs(tft.slope - slope) < 1e-9 and abs(tft.intercept - intercept) < 1e-9)
    assert report(10, ok, f"all-D R2={alld.r2:.6f}; TFT R2={tft.r2:.6f}; TFT undiscounted limit slope "
                          f"{limit.slope:.9f} intercept {limit.intercept:.1e}; at discount {IPD.discount} "
                          f"TFT line slope {tft.slope:.6f} intercept {tft.intercept:.6f}", t0)


def test_c10_stretch_labr(report):
    report("10 (stretch)", False, "M-FOS vs LABR training not run: look-ahead best responses inside "
                                  "every GA fitness evaluation exceed the desk budget")
    pytest.skip("LABR reproduction is a stretch target and is not run at desk scale")


def test_c11_cli_reruns_are_byte_identical(report, tmp_path):
    t0 = time.perf_counter()
    tiny = ["--set", "ga.pop=16", "--set", "ga.generations=2", "--set", "ga.batch=4",
            "--set", "ga.truncation=4", "--set", "ga.hidden=32", "--set", "mmaml.iters=3",
            "--set", "mmaml.batch=8", "--set", "mmaml.T=20"]
    commands = {
        "train": ["train", "--game", "imp", "--algo", "mmaml", "--seed", "5", "--set", "iters=3",
                  "--set", "batch=8", "--set", "T=20"],
        "tournament": ["tournament", "--game", "ipd", "--algos", "nl,lola,mmaml,mfos", "--runs", "2",
                       "--batch", "16", "--seed", "5", *tiny],
        "analyze": ["analyze", "--game", "ipd", "--kind", "region", "--subject", "tft", "--n", "256"],
    }
    same = []
    for label, argv in commands.items():
        files = []
        for copy in ("first", "second"):
            out = tmp_path / copy / label
            assert cli.main([*argv, "--out", str(out)]) == 0
            files.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
        same.append(files[0] == files[1] and len(files[0]) > 1)
    ok = all(same)
    assert report(11, ok, ", ".join(f"{k} {'identical' if s else 'DIFFERS'}" for k, s in zip(commands, same)),
                  t0)
