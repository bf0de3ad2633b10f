import json
import math
import pathlib

import numpy as np
import pytest

import platoon_sim as ps

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def load(name):
    return json.loads((DATA / "scenarios" / name).read_text())


def test_resolve_fills_defaults():
    s = ps.resolve_scenario({"sim": {"n": 4}})
    assert s["sim"]["n"] == 4
    assert s["sim"]["tau"] == 0.1
    assert "detection" in s


def test_benign_run_holds_headway():
    out = ps.simulate(load("benign.json"))
    trace = out["trace"]
    followers = trace["vehicle_id"] > 0
    assert len(trace["x"]) == 100 * 7
    assert np.allclose(trace["headway"][followers], 0.5, atol=1e-6)
    assert math.isnan(trace["headway"][~followers][0])
    assert out["anomalies"] == []
    assert all(v["classification"] == "None" for v in out["report"]["impact"]["vehicles"])


def test_attack_is_flagged():
    out = ps.simulate(load("scenario1_x_ite_fv4.json"))
    steps = [e["control_step"] for e in out["anomalies"]]
    assert steps and 40 <= min(steps) <= 42


def test_deterministic():
    s = load("sinusoid_v_ite_fv4.json")
    assert ps.simulate(s)["trace_csv"] == ps.simulate(s)["trace_csv"]


def test_generate_bias_shape_and_window():
    case = json.loads((DATA.parent / "golden" / "cases" / "running_example.json").read_text())
    quiet = ps.generate_bias(case, 100, 6, 300)
    assert set(quiet) == {"x_ite", "v_ite", "zx_ite", "zv_ite"}
    assert quiet["x_ite"].shape == (300, 6)
    assert not any(m.any() for m in quiet.values())
    active = ps.generate_bias(case, 25, 6, 300)
    assert active["v_ite"][:, 0].any()
    assert not active["v_ite"][:, 1:].any()


def test_replay_matches_live(tmp_path):
    s = load("scenario1_x_ite_fv4.json")
    ps.run_to_dir(s, tmp_path)
    events = ps.replay_detect(tmp_path / "trace.csv", s, s.get("seed", 1))
    assert events == ps.simulate(s)["anomalies"]


def test_errors_map_to_python():
    with pytest.raises(ps.ConfigError):
        ps.simulate({"sim": {"tua": 0.1}})
    with pytest.raises(ValueError):
        ps.simulate("{not json")
    with pytest.raises(ps.ConfigError):
        ps.generate_bias({"x_ite": "bad"}, 0, 6, 300)
