import itertools
import math
import subprocess
import xml.etree.ElementTree as ET

import pytest

import cvsig

SVG = "{http://www.w3.org/2000/svg}"


def test_closed_forms():
    assert cvsig.transform_steps(0) == 0.0
    assert cvsig.transform_steps(99) == pytest.approx(0.921034, abs=1e-6)
    values, mean, std = cvsig.whiten_hr([60.0, 70.0, 80.0])
    assert values == pytest.approx([-1.224745, 0.0, 1.224745], abs=1e-6)
    assert (mean, std) == pytest.approx((70.0, math.sqrt(200.0 / 3.0)))
    assert not cvsig.eligibility_filter([1440] * 9 + [1199] * 5)
    assert cvsig.eligibility_filter([1200] * 10)


def test_simulate_and_model_roundtrip(tmp_path):
    cohort = cvsig.simulate(n_persons=6, days=1, seed=3)
    assert len(cohort["persons"]) == 6
    series = cohort["series"][0]
    assert len(series) == 1440
    assert len(series.activity) == 3

    model = cvsig.init_model(signature_size=8, seed=2)
    assert cvsig.receptive_field() == 128
    assert cvsig.init_model(32).parameter_count == 49089
    signature, attention = cvsig.encode(model, series)
    assert len(signature) == 8
    assert sum(attention) == pytest.approx(1.0, abs=1e-12)
    prediction = cvsig.decode(model, series, signature)
    assert len(prediction) == 1440
    assert math.isfinite(cvsig.masked_loss(model, series))

    path = tmp_path / "m.json"
    cvsig.save_checkpoint(str(path), model)
    back = cvsig.load_checkpoint(str(path))
    assert cvsig.decode(back, series, signature) == prediction


def test_wilcoxon_against_enumeration():
    d = [0.5, -1.5, 2.5, 3.5, -4.5]
    result = cvsig.wilcoxon_signed_rank(d, method="exact")
    ranks = [1, 2, 3, 4, 5]
    v = sum(r for r, x in zip(ranks, d) if x > 0)
    null = [sum(r for r, s in zip(ranks, signs) if s) for signs in itertools.product([0, 1], repeat=5)]
    assert result["v"] == v
    assert result["p_value"] == pytest.approx(sum(x >= v for x in null) / 32.0)
    assert cvsig.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_gbt_stump_and_mean():
    x = [[i / 10.0] for i in range(50)]
    y = [0.0 if row[0] < 2.05 else 1.0 for row in x]
    stump = cvsig.gbt_fit(x, y, n_rounds=1, max_depth=1, learning_rate=1.0)
    assert cvsig.gbt_predict(stump, x) == pytest.approx(y)
    flat = cvsig.gbt_fit(x, y, n_rounds=0)
    assert flat.n_trees == 0
    assert cvsig.gbt_predict(flat, [[0.0]]) == pytest.approx([sum(y) / len(y)])


def test_pipeline_through_bindings(tmp_path, tiny_config):
    out = str(tmp_path / "run")
    for command in ("simulate", "preprocess"):
        cvsig.run_command(command, config=str(tiny_config), out=out)
    assert cvsig.run_command("train", config=str(tiny_config), out=out) == 1
    report = cvsig.run_command("eval", config=str(tiny_config), out=out)
    assert report["n_validation"] >= 2
    assert math.isfinite(report["model_mse"])
    with pytest.raises(Exception):
        cvsig.run_command("bogus", config=str(tiny_config), out=out)


def _cli(cli, *args):
    return subprocess.run([cli, *args], capture_output=True, text=True)


def test_cli_end_to_end_and_svg(tmp_path, tiny_config, cli):
    out = tmp_path / "cli"
    for command in ("simulate", "preprocess", "train", "eval", "sweep", "plot"):
        r = _cli(cli, command, "--config", str(tiny_config), "--seed", "9", "--out", str(out))
        assert r.returncode == 0, r.stderr
    sweep = (out / "sweep" / "sweep_signature_size.csv").read_text().splitlines()
    assert sweep[0] == "signature_size,window1_error,window2_error,best_epoch"
    assert len(sweep) == 3

    svgs = list((out / "plots").glob("*.svg"))
    assert len(svgs) == 1
    root = ET.parse(svgs[0]).getroot()
    assert root.tag == SVG + "svg"
    ids = {el.get("id") for el in root.iter() if el.get("id")}
    assert {"activity-panel", "heart-rate-panel", "steps", "prediction-own", "prediction-other"} <= ids
    own = next(el for el in root.iter() if el.get("id") == "prediction-own")
    assert len(own.get("points").split()) == 240


def test_cli_errors(tmp_path, cli):
    r = _cli(cli, "train", "--out", str(tmp_path / "empty"))
    assert r.returncode != 0
    assert "error" in r.stderr
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nnot_a_key = 1\n")
    r = _cli(cli, "simulate", "--config", str(bad), "--out", str(tmp_path / "x"))
    assert r.returncode != 0
    assert "unknown key" in r.stderr
