import json

import numpy as np

from nhvak.cli import main
from nhvak.systems import CarriageParams, carriage_l_for_unit_xy


def _write_cfg(tmp_path, **overrides):
    cfg = {"version": 1, "system": "unicycle", "params": {},
           "initial": {"q0": [0.0, 0.0, 0.0, 0.0], "v0": [1.0, 2.0]},
           "horizon": 10.0, "step": 1e-3, "seed": 42}
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_simulate_unicycle_row_count_and_constant_alpha(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 10002  # header + T/h + 1 samples
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    # alpha is the pairing of v with the first constraint direction: v0 column
    assert np.max(np.abs(data[:, 5] - 1.0)) <= 1e-9


def test_simulate_zero_horizon_single_row(tmp_path):
    cfg = _write_cfg(tmp_path, horizon=0.0)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 2


def test_simulate_multiplier_csv(tmp_path):
    cfg = _write_cfg(tmp_path, horizon=1.0, multiplier_initial=[0.5, -0.5])
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "multiplier.csv").read_text().splitlines()
    assert lines[0] == "t,lam0,lam1"
    assert len(lines) == 1002


def test_simulate_degenerate_inertia_exits_1_naming_regularity(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, system="carriage",
                     params={"J": 1e-15, "I": 1e-16},
                     initial={"q0": [0.0] * 5, "v0": [1.0, 2.0]}, horizon=1.0)
    code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 1
    assert "regularity" in capsys.readouterr().err


def test_check_heisenberg_all_true(tmp_path):
    cfg = _write_cfg(tmp_path, system="heisenberg",
                     initial={"q0": [0.0] * 3, "v0": [1.0, 0.5]},
                     horizon=5.0,
                     criteria=["NH_IS_UNCONSTRAINED", "NH_IS_VAK_INTEGRAL"])
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "reports.json").read_text())
    assert [r["criterion"] for r in payload] == ["NH_IS_UNCONSTRAINED",
                                                 "NH_IS_VAK_INTEGRAL"]
    assert all(r["verdict"] for r in payload)
    assert list(payload[0].keys()) == ["criterion", "residual", "tolerance",
                                       "verdict", "samples", "system", "params",
                                       "seed"]


def test_check_detuned_carriage_exits_1(tmp_path):
    p = CarriageParams()
    lstar = carriage_l_for_unit_xy(p.m0, p.m1, p.R, p.w, p.I, p.J)
    cfg = _write_cfg(tmp_path, system="carriage",
                     params={"l": lstar * float(np.sqrt(0.5))},
                     initial={"q0": [0.0] * 5, "v0": [1.0, 1.0]},
                     horizon=5.0, criteria=["NH_IS_VAK_INTEGRAL"])
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    payload = json.loads((tmp_path / "reports.json").read_text())
    assert payload[0]["verdict"] is False


def test_check_empty_criteria_exits_2(tmp_path):
    cfg = _write_cfg(tmp_path, criteria=[])
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_check_unknown_criterion_exits_2(tmp_path):
    cfg = _write_cfg(tmp_path, criteria=["NOT_A_CRITERION"])
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_unknown_config_key_exits_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"version": 1, "system": "unicycle", "tpyo": 1}))
    assert main(["check", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_missing_version_exits_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"system": "unicycle"}))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_check_vak_is_nh_via_cli(tmp_path):
    cfg = _write_cfg(tmp_path, horizon=5.0,
                     criteria=["NH_IS_VAK_MULTIPLIER", "VAK_IS_NH"])
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_sweep_carriage_root_row_only(tmp_path):
    p = CarriageParams()
    lstar = carriage_l_for_unit_xy(p.m0, p.m1, p.R, p.w, p.I, p.J)
    values = [0.5 * lstar, lstar, 1.4 * lstar]
    cfg = _write_cfg(tmp_path, system="carriage", params={},
                     initial={"q0": [0.0] * 5, "v0": [1.0, 1.5]}, horizon=5.0)
    code = main(["sweep", "--config", str(cfg), "--out", str(tmp_path),
                 "--param", "l", "--values", ",".join(str(v) for v in values)])
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "value,XY,residual,verdict"
    verdicts = [ln.rsplit(",", 1)[1] for ln in lines[1:]]
    assert verdicts == ["false", "true", "false"]
    xys = [float(ln.split(",")[1]) for ln in lines[1:]]
    assert abs(xys[1] - 1.0) <= 1e-12


def test_sweep_empty_values_header_only(tmp_path):
    cfg = _write_cfg(tmp_path)
    code = main(["sweep", "--config", str(cfg), "--out", str(tmp_path),
                 "--param", "m", "--values", ""])
    assert code == 0
    assert (tmp_path / "sweep.csv").read_text() == "value,XY,residual,verdict\n"


def test_sweep_unicycle_mass_all_true(tmp_path):
    cfg = _write_cfg(tmp_path, horizon=5.0)
    code = main(["sweep", "--config", str(cfg), "--out", str(tmp_path),
                 "--param", "m", "--values", "0.5,1.0,2.0"])
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()[1:]
    assert all(ln.endswith("true") for ln in lines)


def test_determinism_byte_identical(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    cfg = _write_cfg(tmp_path, horizon=2.0,
                     criteria=["NH_IS_VAK_INTEGRAL", "NH_IS_VAK_MULTIPLIER"])
    assert main(["check", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["check", "--config", str(cfg), "--out", str(out2)]) == 0
    assert (out1 / "reports.json").read_bytes() == (out2 / "reports.json").read_bytes()
    assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()


def test_report_pretty_print(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, system="heisenberg",
                     initial={"q0": [0.0] * 3, "v0": [1.0, 0.5]},
                     horizon=2.0, criteria=["NH_IS_UNCONSTRAINED"])
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["report", str(tmp_path / "reports.json")]) == 0
    out = capsys.readouterr().out
    assert "NH_IS_UNCONSTRAINED" in out and "heisenberg" in out


def test_tolerance_override_flag(tmp_path):
    # an absurdly tight tolerance flips a true verdict whose residual is
    # tiny but nonzero (the tuned carriage, unlike the exactly-zero unicycle)
    p = CarriageParams()
    lstar = carriage_l_for_unit_xy(p.m0, p.m1, p.R, p.w, p.I, p.J)
    cfg = _write_cfg(tmp_path, system="carriage", params={"l": lstar},
                     initial={"q0": [0.0] * 5, "v0": [1.0, 2.0]},
                     horizon=2.0, criteria=["NH_IS_VAK_INTEGRAL"])
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path),
                 "--tol", "NH_IS_VAK_INTEGRAL=1e-30"]) == 1


def test_config_algebra_section_validated(tmp_path):
    # matching constants pass; disagreeing ones are a config error
    good = _write_cfg(tmp_path, system="heisenberg",
                      initial={"q0": [0.0] * 3, "v0": [1.0, 0.5]},
                      horizon=1.0, criteria=["NH_IS_UNCONSTRAINED"],
                      algebra={"dim": 3, "labels": ["e1", "e2", "e3"],
                               "constants": [[2, 0, 1, -2.0]]})
    assert main(["check", "--config", str(good), "--out", str(tmp_path)]) == 0
    bad = _write_cfg(tmp_path, system="heisenberg",
                     initial={"q0": [0.0] * 3, "v0": [1.0, 0.5]},
                     horizon=1.0, criteria=["NH_IS_UNCONSTRAINED"],
                     algebra={"constants": [[2, 0, 1, -3.0]]})
    assert main(["check", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_config_splitting_override_is_immaterial(tmp_path):
    # replacing the complement d' must not change any verdict
    base = _write_cfg(tmp_path, horizon=3.0, criteria=["NH_IS_VAK_INTEGRAL"])
    assert main(["check", "--config", str(base), "--out", str(tmp_path / "a")]) == 0
    cfg = _write_cfg(tmp_path, horizon=3.0, criteria=["NH_IS_VAK_INTEGRAL"],
                     splitting={"dprime_basis": [[1.0, 0.2], [0.0, 1.0],
                                                 [0.3, 0.0], [0.0, -0.4]]})
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    import json as _json
    va = _json.loads((tmp_path / "a" / "reports.json").read_text())[0]["verdict"]
    vb = _json.loads((tmp_path / "b" / "reports.json").read_text())[0]["verdict"]
    assert va == vb is True


def test_config_splitting_rejects_degenerate_complement(tmp_path):
    # a "complement" inside d cannot span the quotient
    cfg = _write_cfg(tmp_path, horizon=1.0, criteria=["NH_IS_UNCONSTRAINED"],
                     splitting={"dprime_basis": [[1.0, 0.0], [0.0, 0.0],
                                                 [0.0, 1.0], [1.0, 0.0]]})
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 2
