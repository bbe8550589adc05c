import json

import numpy as np
import pytest

from npg_lab.bandit import BanditInstance
from npg_lab.cli import main
from npg_lab.experiments import (
    BANDIT_COLUMNS,
    MDP_COLUMNS,
    PRESETS,
    ExperimentSpec,
    InitSpec,
    failure_rate,
    load_spec,
    preset,
    read_trace_csv,
    run_experiment,
    spec_from_dict,
    spec_to_dict,
)
from npg_lab.mdp import random_mdp, tree_mdp
from npg_lab.updates import ConstantStep, EstimatorKind, UpdateConfig


def _small_bandit(**kw):
    base = preset("bandit-adversarial-stochastic")
    return base.with_overrides(iterations=20_000, seeds=(0, 1, 2), **kw)


def test_presets_resolve():
    for name in PRESETS:
        spec = preset(name)
        assert spec.name == name and spec.seeds
    with pytest.raises(KeyError):
        preset("nope")
    adv = preset("bandit-adversarial-stochastic")
    assert adv.init.logits[1] == 5.0 and sum(adv.init.logits) == 5.0
    assert adv.update.step.denom == 9.0 and adv.update.step.scale == 0.5


def test_spec_validation():
    inst = BanditInstance.deterministic([1.0, 0.0])
    with pytest.raises(ValueError):
        ExperimentSpec("x", inst, update=UpdateConfig(), seeds=())
    with pytest.raises(ValueError):
        ExperimentSpec("x", inst)
    with pytest.raises(ValueError):
        ExperimentSpec("x", inst, update=UpdateConfig(EstimatorKind.STOCHASTIC_IS), forced_action=0)
    with pytest.raises(TypeError):
        ExperimentSpec("x", object(), update=UpdateConfig())
    with pytest.raises(ValueError):
        InitSpec("explicit")


@pytest.mark.parametrize("name", PRESETS)
def test_spec_json_round_trip(name):
    spec = preset(name)
    doc = json.loads(json.dumps(spec_to_dict(spec)))
    back = spec_from_dict(doc)
    assert spec_to_dict(back) == spec_to_dict(spec)


def test_spec_file_with_presets(tmp_path):
    doc = {
        "name": "tiny-tree",
        "environment": {"kind": "mdp", "preset": "tree", "depth": 2},
        "init": {"kind": "adversarial", "opt_prob": 0.1},
        "eta": 0.2,
        "seeds": {"count": 2},
        "iterations": 50,
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    spec = load_spec(str(path))
    assert spec.environment.S == 5 and spec.seeds == (0, 1)
    res = run_experiment(spec)
    assert res[0].columns == MDP_COLUMNS
    assert res[0].trace[-1, 0] == 51


def test_byte_identical_outputs_across_thread_counts(tmp_path):
    spec = _small_bandit()
    run_experiment(spec, out_dir=tmp_path / "a", threads=1)
    run_experiment(spec, out_dir=tmp_path / "b", threads=3)
    files = sorted(p.name for p in (tmp_path / "a" / spec.name).iterdir())
    assert "summary.json" in files and len(files) == 4
    for name in files:
        a = (tmp_path / "a" / spec.name / name).read_bytes()
        b = (tmp_path / "b" / spec.name / name).read_bytes()
        assert a == b


def test_csv_schema(tmp_path):
    spec = _small_bandit()
    run_experiment(spec, out_dir=tmp_path)
    cols = read_trace_csv(tmp_path / spec.name / "run000_seed0.csv")
    assert tuple(cols) == BANDIT_COLUMNS
    assert cols["t"][0] == 1 and cols["t"][-1] == spec.iterations + 1
    assert np.all(np.diff(cols["t"]) > 0)
    assert np.all((cols["pi_opt"] > 0) & (cols["pi_opt"] < 1))
    summary = json.loads((tmp_path / spec.name / "summary.json").read_text())
    assert len(summary["runs"]) == 3 and summary["runs"][0]["trace_path"] == "run000_seed0.csv"


def test_seed_base_shifts_streams():
    spec = _small_bandit()
    a = run_experiment(spec.with_overrides(seeds=(3,)))
    b = run_experiment(spec.with_overrides(seeds=(0,)), seed_base=3)
    assert np.array_equal(a[0].trace, b[0].trace, equal_nan=True)


def test_numerical_failure_is_recorded():
    # pi(1) is subnormal, so the forced importance weight overflows on the first step
    inst = BanditInstance.deterministic([0.5, 1.0])
    spec = ExperimentSpec(
        "boom",
        inst,
        InitSpec("explicit", logits=(370.0, -370.0)),
        UpdateConfig(EstimatorKind.SIMPLIFIED_IS, False, ConstantStep(1.0)),
        seeds=(0, 1),
        forced_action=1,
        iterations=10,
    )
    res = run_experiment(spec)
    for r in res:
        assert r.summary.failed
        assert r.summary.failure["t"] == 1 and r.summary.failure["action"] == 1


def test_failure_rate_presets_small():
    no_base = preset("failure-no-baseline").with_overrides(seeds=tuple(range(40)))
    assert failure_rate(no_base, 1e-3, 20_000) > 0
    assert failure_rate(no_base, 1.1, 100) == 1.0
    with_base = preset("failure-baseline").with_overrides(seeds=tuple(range(40)))
    assert failure_rate(with_base, 1e-3, 20_000) == 0.0


def test_dense_mdp_path():
    mdp = random_mdp(3, 2, np.random.default_rng(0))
    spec = ExperimentSpec("rand", mdp, eta=0.5, seeds=(0,), iterations=200)
    res = run_experiment(spec)[0]
    assert res.summary.monotone_violations == 0
    assert res.summary.final_gap < res.trace[0, 3]


def test_tree_short_run_summary():
    spec = preset("tree-adversarial").with_overrides(iterations=2000)
    s = run_experiment(spec)[0].summary
    assert s.monotone_violations == 0
    assert 0 < s.min_opt_prob <= 0.07
    assert s.final_value > 6.59


def test_cli_verify_and_run(tmp_path, capsys):
    assert main(["verify", "--suite", "variance"]) == 0
    records = json.loads(capsys.readouterr().out)
    assert {r["check"] for r in records} >= {"second_moments", "unbiasedness"}
    assert main(["--out-dir", str(tmp_path), "run", "committal-baseline", "--iterations", "5000"]) == 0
    capsys.readouterr()
    csv = tmp_path / "committal-baseline" / "run000_seed0.csv"
    assert main(["analyze", "committal", "--input", str(csv), "--window", "100", "5000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["model"] == "polynomial"
    assert main(["--out-dir", str(tmp_path), "run", "tree-adversarial", "--iterations", "300"]) == 0
    capsys.readouterr()
    csv = tmp_path / "tree-adversarial" / "run000_seed0.csv"
    assert main(["analyze", "slope", "--input", str(csv), "--window", "10", "300"]) == 0
    assert "slope" in json.loads(capsys.readouterr().out)


def test_cli_verify_exit_code_on_failure(monkeypatch, capsys):
    import npg_lab.cli as cli

    monkeypatch.setattr(
        cli, "run_suite", lambda name, seed=0: [{"check": "x", "params": {}, "slack": -1.0, "pass": False}]
    )
    assert cli.main(["verify"]) == 1
