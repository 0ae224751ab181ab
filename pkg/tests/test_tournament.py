import json

import numpy as np
import pytest

from opshape.experiments import MissingArtifactError, policy_path
from opshape.games import make_game
from opshape.tournament import (MatchConfig, TournamentResult, ensure_artifacts, head_to_head,
                                round_robin, write_tournament)

TINY = {"ga": dict(pop=8, batch=4, generations=2, truncation=4, hidden=16, T=20),
        "mmaml": dict(iters=3, batch=4, T=20)}


def test_nl_pair_in_ipd():
    a, b, sa, sb = head_to_head(MatchConfig(make_game("ipd"), "nl", "nl", batch=256, runs=2))
    assert a == pytest.approx(-1.98, abs=0.1) and b == pytest.approx(-1.98, abs=0.1)
    assert sa >= 0 and sb >= 0


def test_nl_pair_in_imp_is_near_zero():
    a, b, _, _ = head_to_head(MatchConfig(make_game("imp"), "nl", "nl", batch=512, runs=2))
    assert abs(a) < 0.02 and abs(b) < 0.02 and a + b == pytest.approx(0, abs=1e-12)


def test_missing_artifact_names_training_command(tmp_path):
    cfg = MatchConfig(make_game("ipd"), "mfos", "nl", batch=4, runs=1, artifacts=tmp_path)
    with pytest.raises(MissingArtifactError, match="opshape train --game ipd --algo mfos --opponent nl"):
        head_to_head(cfg)
    cfg = MatchConfig(make_game("ipd"), "mmaml", "nl", batch=4, runs=1, artifacts=tmp_path)
    with pytest.raises(MissingArtifactError, match="--algo mmaml"):
        head_to_head(cfg)


def test_match_config_validation():
    with pytest.raises(ValueError):
        head_to_head(MatchConfig(make_game("ipd"), "nl", "nl", runs=0))
    with pytest.raises(KeyError):
        head_to_head(MatchConfig(make_game("ipd"), "nl", "sarsa"))
    with pytest.raises(ValueError):
        head_to_head(MatchConfig(make_game("ipd"), "labr", "labr"))


def test_round_robin_trains_per_column_and_is_reproducible(tmp_path):
    g = make_game("imp")
    algos = ["nl", "mmaml", "mfos"]
    r1 = round_robin(g, algos, seed=1, root=tmp_path / "a", runs=2, batch=16, overrides=TINY, T=20)
    for opp in algos:
        assert policy_path(tmp_path / "a", "imp", opp, "ga", 1).exists()
    r2 = round_robin(g, algos, seed=1, root=tmp_path / "b", runs=2, batch=16, overrides=TINY, T=20)
    np.testing.assert_array_equal(r1.mean, r2.mean)
    j1, _ = write_tournament(r1, tmp_path / "o1")
    j2, _ = write_tournament(r2, tmp_path / "o2")
    assert j1.read_bytes() == j2.read_bytes()
    # zero-sum: each ordered pair is the negative of its mirror within noise
    for i in range(3):
        for j in range(3):
            tol = 2 * np.hypot(r1.std[i, j], r1.std[j, i]) + 0.05
            assert abs(r1.mean[i, j] + r1.mean[j, i]) <= tol
    lo, hi = g.payoff_bounds()
    assert np.all((r1.mean >= lo) & (r1.mean <= hi))


def test_no_train_reports_missing(tmp_path):
    with pytest.raises(MissingArtifactError):
        ensure_artifacts(make_game("ipd"), ["nl", "mfos"], 0, "desk", tmp_path, train_missing=False)


def test_result_serialization_and_table(tmp_path):
    res = TournamentResult("ipd", ["nl", "labr"], np.array([[-2.0, -1.5], [-1.0, np.nan]]),
                           np.array([[0.01, 0.02], [0.03, np.nan]]), 0, {"runs": 3})
    back = TournamentResult.from_dict(json.loads(json.dumps(res.to_dict())))
    np.testing.assert_array_equal(back.mean, res.mean)
    text = res.to_text()
    lines = text.splitlines()
    assert "NL" in lines[0] and "LABR" in lines[0] and "n/a" in lines[3]
    assert len({len(line) for line in (lines[0], lines[2], lines[3])}) == 1
    assert res.cell("nl", "labr") == (-1.5, 0.02)
