import csv
import json

import pytest

from mctsga import cli
from mctsga.config import RunConfig, derive_seed, load_config
from mctsga.errors import DataError, NumericalError

FAST = ["--set", "train.epochs=3", "--set", "ga.generations=3", "--set", "ga.population_size=6",
        "--set", "mcts.iteration_budget=3", "--set", "mcts.rollout_generations=2",
        "--set", "mcts.branching_factor=2"]


def read_labels(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))[1:]
    return [int(r[-1]) for r in rows]


def test_prep_outputs_balanced_and_deterministic(tmp_path, capsys):
    assert cli.main(["prep", "--seed", "3", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["prep", "--seed", "3", "--out", str(tmp_path / "b")]) == 0
    for part in ("train.csv", "test.csv", "scaler.json"):
        assert (tmp_path / "a" / part).read_bytes() == (tmp_path / "b" / part).read_bytes()
    train = read_labels(tmp_path / "a" / "train.csv")
    test = read_labels(tmp_path / "a" / "test.csv")
    assert train.count(0) == train.count(1) == 201
    assert test.count(0) == test.count(1) == 67
    scaler = json.loads((tmp_path / "a" / "scaler.json").read_text())
    assert len(scaler["min"]) == len(scaler["max"]) == 8


def test_prep_missing_file(tmp_path, capsys):
    code = cli.main(["prep", "--csv", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_run_single_approach(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["run", "--approach", "nn-adam", "--out", str(out)] + FAST) == 0
    report = json.loads((out / "report.json").read_text())
    assert list(report["approaches"]) == ["nn-adam"]
    entry = report["approaches"]["nn-adam"]
    assert {"accuracy", "recall", "auc", "confusion", "wall_clock_seconds"} <= set(entry)
    assert report["config"]["train.epochs"] == 3
    assert report["config"]["mcts.branching_factor"] == 2  # defaults are resolved too
    assert report["config"]["ga.tournament_k"] == 3
    with open(out / "roc_nn-adam.csv") as fh:
        assert next(csv.reader(fh)) == ["fpr", "tpr"]
    assert (out / "history_nn-adam.csv").exists() and (out / "model_nn-adam.json").exists()


def test_run_compare_same_split_and_artifacts(tmp_path, capsys):
    out = tmp_path / "cmp"
    assert cli.main(["run", "--approach", "compare", "--seed", "4", "--out", str(out)] + FAST) == 0
    report = json.loads((out / "report.json").read_text())
    assert list(report["approaches"]) == ["nn-sgd", "nn-adam", "ga", "mcts-ga"]
    for name in report["approaches"]:
        assert (out / f"roc_{name}.csv").exists()
        assert (out / f"history_{name}.csv").exists()
        cm = report["approaches"][name]["confusion"]
        assert sum(cm.values()) == report["data"]["n_test"]
    with open(out / "history_ga.csv") as fh:
        assert next(csv.reader(fh)) == ["generation", "best_fitness", "mean_fitness"]
    assert report["seeds"]["ga"] == derive_seed(4, "ga")
    printed = capsys.readouterr().out
    assert "MCTS-GA" in printed and "accuracy" in printed

    assert cli.main(["report", str(out)]) == 0
    assert "Genetic Algorithm" in capsys.readouterr().out


def test_run_failure_removes_partial_artifacts(tmp_path, monkeypatch):
    out = tmp_path / "bad"

    def boom(*a, **k):
        raise NumericalError("non-finite fitness", epoch=0)

    monkeypatch.setattr(cli, "run_ga", boom)
    code = cli.main(["run", "--approach", "compare", "--out", str(out)] + FAST)
    assert code == 3
    assert list(out.iterdir()) == []


def test_run_bad_seed_model_exit_2(tmp_path):
    code = cli.main(["run", "--approach", "ga", "--out", str(tmp_path / "o"),
                     "--set", "genome.seed_model=/no/such/model.json"] + FAST)
    assert code == 2


def test_config_file_dotted_keys(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text('seed = 11\napproach = "ga"\nmcts.branching_factor = 7\n'
                 'ga.mutation_mode = "swap_within_individual"\n[train]\nepochs = 5\n')
    cfg = load_config(p, ["mcts.exploration_c=1.5"])
    assert cfg.seed == 11 and cfg.approach == "ga"
    assert cfg.mcts.branching_factor == 7 and cfg.mcts.exploration_c == 1.5
    assert cfg.ga.mutation_mode == "swap_within_individual"
    assert cfg.train.epochs == 5
    flat = cfg.to_flat()
    assert flat["mcts.branching_factor"] == 7 and "mcts.seed" not in flat


@pytest.mark.parametrize("text", ["mcts.nope = 1\n", "ga.seed = 3\n", "bogus.x = 1\n",
                                  "ga.generations = \"many\"\n", "seed = = 1\n"])
def test_config_rejects_bad_keys(tmp_path, text):
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    with pytest.raises(DataError):
        load_config(p)


def test_seed_derivation_is_labelled():
    a = RunConfig(seed=1).seeds()
    b = RunConfig(seed=2).seeds()
    assert len(set(a.values())) == len(a)
    assert a != b
    assert a["ga"] == derive_seed(1, "ga")


def test_strip_timing():
    rep = {"a": 1, "wall_clock_seconds": 2.0, "runtime": {"workers": 3},
           "x": {"search": {"wall_clock_seconds": 1.0, "iterations": 4}}}
    assert cli.strip_timing(rep) == {"a": 1, "x": {"search": {"iterations": 4}}}
