import csv
import json
import math

import numpy as np
import pytest

from teamup import cli
from teamup.arena import (
    MatchConfig,
    MatchError,
    TournamentTable,
    read_trace,
    replay_trace,
    run_match,
    run_tournament,
    state_visit_summary,
    tournament_jobs,
    write_table_csv,
    write_trace,
)
from teamup.agent import Agent
from teamup.games import coordination_game
from teamup.zoo import KINDS, AgentSpec

from .oracles import lsg_mean_against_uniform

CHEAP = [AgentSpec("constant_lead"), AgentSpec("uniform_random"), AgentSpec("noisy_lead"), AgentSpec("ideal_follower")]


def specs(*texts):
    return [AgentSpec.parse(t) for t in texts]


class TestRunMatch:
    def test_collaboration_means(self):
        result = run_match(MatchConfig(specs("constant_lead:start=0", "ideal_follower:target=0", "uniform_random"), 1000, 1))
        expected = lsg_mean_against_uniform()
        assert np.allclose(expected, [9, 9, 6])
        assert np.allclose(result.mean_utilities(), expected, atol=0.3)

    def test_conservation(self):
        for kind in KINDS:
            result = run_match(MatchConfig([AgentSpec(kind), AgentSpec("myopic_partner"), AgentSpec("satisficing_cycler")], 60, 5))
            assert np.all(result.utilities.sum(axis=1) == 24)

    def test_determinism(self):
        roster = specs("teamup", "myopic_partner", "noisy_lead")
        a, b = (run_match(MatchConfig(roster, 80, 9)) for _ in range(2))
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.utilities, b.utilities)
        assert a.features == b.features and a.diagnostics == b.diagnostics

    def test_seeds_differ(self):
        roster = specs("uniform_random", "uniform_random", "uniform_random")
        a, b = (run_match(MatchConfig(roster, 20, s)) for s in (1, 2))
        assert not np.array_equal(a.actions, b.actions)

    @pytest.mark.parametrize("third", ["uniform_random", "teamup", "myopic_partner", "satisficing_cycler"])
    def test_locked_pair_holds_third_at_six(self, third):
        result = run_match(MatchConfig(specs("constant_lead:start=5", "ideal_follower:target=0", third), 100, 4))
        assert np.all(result.utilities[2:, 2] == 6)
        assert np.all(result.actions[1:, 1] == 11)

    def test_protocol_violation_names_stage(self, monkeypatch):
        class Wild(Agent):
            def __init__(self, start=None):
                pass

            def choose(self):
                return 12 if self.stage == 3 else 0

        monkeypatch.setitem(KINDS, "wild", Wild)
        with pytest.raises(MatchError, match="stage 3"):
            run_match(MatchConfig([AgentSpec("wild"), AgentSpec("uniform_random"), AgentSpec("uniform_random")], 5))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MatchConfig(specs("uniform_random", "uniform_random"), 10)
        with pytest.raises(ValueError):
            MatchConfig(specs("uniform_random", "uniform_random", "uniform_random"), 0)

    def test_other_games(self):
        result = run_match(MatchConfig(specs("constant_lead", "ideal_follower:target=0"), 20, 0, game=coordination_game()))
        assert result.actions.shape == (20, 2)
        assert np.all(result.actions[1:, 1] == result.actions[0, 0])

    def test_explicit_seed_overrides_stream(self):
        a = run_match(MatchConfig(specs("uniform_random:seed=7", "uniform_random", "uniform_random"), 30, 1))
        b = run_match(MatchConfig(specs("uniform_random:seed=7", "uniform_random", "uniform_random"), 30, 2))
        assert np.array_equal(a.actions[:, 0], b.actions[:, 0])


class TestSummary:
    def test_two_stage_match_is_all_other(self):
        result = run_match(MatchConfig(specs("teamup", "uniform_random", "uniform_random"), 2, 0))
        s = state_visit_summary(result, 0)
        assert (s.optimal, s.worst, s.other) == (0, 0, 1)

    def test_fractions_sum_to_one(self):
        for seed in range(5):
            result = run_match(MatchConfig(specs("teamup", "myopic_partner", "satisficing_cycler"), 100, seed))
            s = state_visit_summary(result, 0, first=21)
            assert s.stages == 80
            assert math.isclose(s.optimal + s.worst + s.other, 1.0)

    def test_locked_pair_is_worst_for_the_third(self):
        result = run_match(MatchConfig(specs("constant_lead:start=5", "ideal_follower:target=0", "uniform_random"), 60, 0))
        assert state_visit_summary(result, 2, first=10).worst == 1.0

    def test_follower_of_planner_is_optimal(self):
        result = run_match(MatchConfig(specs("constant_lead:start=5", "ideal_follower:target=0", "uniform_random"), 60, 0))
        assert state_visit_summary(result, 0, first=10).optimal == 1.0


class TestTournament:
    def test_three_strategies_one_triplet(self):
        table, results = run_tournament(CHEAP[:3], repeats=4, seed=1, stages=20, keep_results=True)
        assert [key for key, _ in results] == [(0, r) for r in range(4)]
        assert all(n == 4 for *_, n in table.rows)

    def test_averages_recomputable(self):
        table, results = run_tournament(CHEAP, repeats=3, seed=2, stages=25, keep_results=True)
        per = {}
        for _, result in results:
            for label, row in zip(result.labels, result.utilities.T):
                per.setdefault(label, []).append(row.mean())
        for name, avg, se, n in table.rows:
            assert n == len(per[name]) == 9
            assert avg == pytest.approx(np.mean(per[name]), abs=1e-12)
            assert se == pytest.approx(np.std(per[name], ddof=1) / math.sqrt(n), abs=1e-12)
            assert 0 <= avg <= 24

    def test_sorted_best_first(self):
        table = run_tournament(CHEAP, repeats=3, seed=0, stages=20)
        avgs = [r[1] for r in table.rows]
        assert avgs == sorted(avgs, reverse=True)

    def test_distinct_seeds_and_balanced_seating(self):
        jobs = list(tournament_jobs(CHEAP, 6, 0))
        assert len({j[3] for j in jobs}) == len(jobs)
        for ci in range(4):
            assert len({j[2] for j in jobs if j[0] == ci}) == 6

    def test_serial_matches_parallel(self):
        a = run_tournament(CHEAP, repeats=3, seed=5, stages=30)
        b = run_tournament(CHEAP, repeats=3, seed=5, stages=30, workers=2)
        assert a.rows == b.rows

    def test_standard_error_shrinks(self):
        for seed in range(6):
            small = dict((r[0], r[2]) for r in run_tournament(CHEAP, repeats=8, seed=seed, stages=20).rows)
            big = dict((r[0], r[2]) for r in run_tournament(CHEAP, repeats=16, seed=seed, stages=20).rows)
            for name in small:
                if small[name] > 0:
                    assert big[name] <= small[name] * 1.2

    def test_roster_validation(self):
        with pytest.raises(ValueError):
            run_tournament(CHEAP[:2], repeats=1)
        with pytest.raises(ValueError):
            run_tournament([CHEAP[0], CHEAP[0], CHEAP[1]], repeats=1)


class TestFiles:
    def test_empty_table_is_header_only(self, tmp_path):
        path = write_table_csv(TournamentTable(), tmp_path / "t.csv")
        assert path.read_text() == "rank,strategy,avg_utility,std_err\n"

    def test_table_csv(self, tmp_path):
        table = TournamentTable.from_match_means({"a": [8.0, 9.0], "b": [7.0, 7.0], "c": [10.0]})
        rows = list(csv.reader(open(write_table_csv(table, tmp_path / "t.csv"))))
        assert rows[1] == ["1", "c", "10.000000", "nan"]
        assert rows[2][:3] == ["2", "a", "8.500000"]
        assert rows[3] == ["3", "b", "7.000000", "0.000000"]

    def test_trace_has_one_record_per_stage(self, tmp_path):
        result = run_match(MatchConfig(specs("teamup", "ideal_follower:target=0", "uniform_random"), 100, 3))
        path = write_trace(result, tmp_path / "m.jsonl")
        lines = path.read_text().splitlines()
        assert len(lines) == 100
        rec = json.loads(lines[50])
        assert set(rec) == {"stage", "actions", "utilities", "features", "planner_state", "planner_action", "replanned"}
        assert rec["stage"] == 51

    def test_replay_round_trip(self, tmp_path):
        result = run_match(MatchConfig(specs("teamup", "myopic_partner", "noisy_lead"), 100, 8))
        path = write_trace(result, tmp_path / "m.jsonl")
        assert replay_trace(path) == []
        back = read_trace(path)
        assert np.array_equal(back.actions, result.actions)
        assert np.array_equal(back.utilities, result.utilities)
        assert back.features == result.features
        assert back.planner == 0
        assert state_visit_summary(back, 0) == state_visit_summary(result, 0)

    def test_replay_catches_tampering(self, tmp_path):
        result = run_match(MatchConfig(specs("uniform_random", "uniform_random", "uniform_random"), 10, 8))
        path = write_trace(result, tmp_path / "m.jsonl")
        lines = path.read_text().splitlines()
        rec = json.loads(lines[4])
        rec["utilities"][0] += 1
        lines[4] = json.dumps(rec)
        path.write_text("\n".join(lines) + "\n")
        problems = replay_trace(path)
        assert problems and all(p.startswith("stage 5") for p in problems)

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError, match="nope"):
            write_table_csv(TournamentTable(), tmp_path / "nope" / "t.csv")


class TestCli:
    def test_match_is_byte_deterministic(self, tmp_path, capsys):
        for d in ("a", "b"):
            assert cli.main(["match", "--seed", "4", "--stages", "50", "--out", str(tmp_path / d)]) == 0
        for name in ("trace.jsonl", "trace.jsonl.meta.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert len((tmp_path / "a" / "trace.jsonl").read_text().splitlines()) == 50

    def test_tournament_is_byte_deterministic(self, tmp_path):
        args = ["tournament", "--repeats", "2", "--stages", "20", "--seed", "1", "--traces"]
        roster = ["constant_lead", "uniform_random", "noisy_lead", "teamup"]
        for d in ("a", "b"):
            assert cli.main(args + ["--out", str(tmp_path / d)] + roster) == 0
        assert (tmp_path / "a" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()
        traces = sorted(p.name for p in (tmp_path / "a" / "traces").iterdir())
        assert len([t for t in traces if t.endswith(".jsonl")]) == 8
        for t in traces:
            assert (tmp_path / "a" / "traces" / t).read_bytes() == (tmp_path / "b" / "traces" / t).read_bytes()

    def test_config_file(self, tmp_path):
        config = {
            "agents": ["teamup", {"kind": "constant_lead", "start": 2}, "uniform_random"],
            "teamup": {"epsilon": 3.0},
            "stages": 12,
            "seed": 2,
        }
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config))
        assert cli.main(["match", "--config", str(path), "--out", str(tmp_path)]) == 0
        records = (tmp_path / "trace.jsonl").read_text().splitlines()
        assert len(records) == 12
        assert all(json.loads(r)["actions"][1] == 2 for r in records)
        # flags win over the file
        assert cli.main(["match", "--config", str(path), "--stages", "5", "--out", str(tmp_path)]) == 0
        assert len((tmp_path / "trace.jsonl").read_text().splitlines()) == 5

    def test_summary_and_replay(self, tmp_path, capsys):
        cli.main(["match", "--seed", "1", "--out", str(tmp_path)])
        trace = str(tmp_path / "trace.jsonl")
        assert cli.main(["summary", trace, "--first", "21", "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "summary.json").read_text())
        assert data["stages"] == 80
        assert math.isclose(data["optimal"] + data["worst"] + data["other"], 1.0)
        assert cli.main(["replay", trace]) == 0

    def test_replay_failure_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"stage": 1, "actions": [0, 0, 0], "utilities": [9, 9, 9]}) + "\n")
        assert cli.main(["replay", str(path)]) == 1
        assert "stage 1" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [
            ["match", "nobody"],
            ["match", "--stages", "0"],
            ["match", "uniform_random"],
            ["match", "--config", "/does/not/exist.json"],
            ["tournament", "--repeats", "1", "teamup", "uniform_random"],
            ["summary", "/does/not/exist.jsonl"],
        ],
    )
    def test_validation_failures(self, argv, capsys, tmp_path):
        assert cli.main(argv + ["--out", str(tmp_path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_bad_json_config(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert cli.main(["match", "--config", str(path), "--out", str(tmp_path)]) == 1
