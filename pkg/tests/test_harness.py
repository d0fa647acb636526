import json

import numpy as np
import pytest

from adaptive_observer.config import ConfigError, load_config, load_raw, parse_config, preset_names
from adaptive_observer.runner import (audit_identities, column_names, compare_estimators,
                                      normalized_estimates, run_experiment, write_outputs)


def zero_plant_raw():
    return {"name": "zero", "plant": {"a_vec": [0.0], "B": [[0.0]]}, "x0": [0.0],
            "observer": {"f_vec": [0.0], "x_hat0": [0.0]},
            "estimator": {"k0": 10.0, "k_min": 1e-3, "R": [[1.0]]},
            "input": {"kind": "constant", "amplitudes": [0.0]}, "horizon": 25}


def test_presets_listed_and_load():
    names = preset_names()
    assert {"siso", "siso_rich", "mimo_pe", "mimo_nonpe", "mimo_stable"} <= set(names)
    for name in names:
        cfg = load_config(name)
        assert cfg.horizon >= 1 and cfg.provenance in ("published-example", "approximation",
                                                       "synthetic")


def test_siso_preset_values():
    cfg = load_config("siso")
    assert cfg.estimator.k0 == 10000 and cfg.estimator.k_min == 1e-4
    assert np.array_equal(cfg.estimator.R, [[1.0]]) and cfg.forgetting_lam == 0.5
    assert np.allclose(cfg.true_p, [0.03, -0.05, 0.43, -0.35], atol=1e-15)


def test_mimo_stable_checked_at_load():
    raw = load_raw("mimo_stable")
    assert raw["require_stable_plant"] is True
    load_config("mimo_stable")
    raw["plant"]["a_vec"] = [4.0, 0.11, 0.3]
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert info.value.problems[0][0] == "plant"


def test_zero_plant_all_zero_log():
    log = run_experiment(parse_config(zero_plant_raw()))
    for prefix in ("u", "y", "y_hat", "p_hat", "p_norm"):
        block = log.block(prefix)
        assert block.size and not block.any()
    for col in ("p_til_norm", "x_til_norm", "y_identity_resid", "x_identity_resid"):
        assert not log.column(col).any()
    assert log.summary["reset_count"] == 0 and log.summary["truncated"] == "no"


def test_horizon_zero_rejected():
    raw = zero_plant_raw()
    raw["horizon"] = 0
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert [p for p, _ in info.value.problems] == ["horizon"]
    with pytest.raises(ConfigError):
        load_config("siso").with_overrides(horizon=0)


def test_validation_reports_every_field():
    raw = zero_plant_raw()
    raw["x0"] = [0.0, 1.0]
    raw["observer"]["f_vec"] = [1.5]
    raw["estimator"]["k_min"] = 100.0
    raw["input"]["amplitudes"] = [1.0, 2.0]
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    paths = {p for p, _ in info.value.problems}
    assert {"x0", "observer.f_vec", "estimator", "input.amplitudes"} <= paths
    with pytest.raises(ConfigError) as info:
        parse_config({"plant": {}})
    assert "horizon" in {p for p, _ in info.value.problems}


def test_normalized_estimates_raw_fallback():
    vals, raw = normalized_estimates(np.array([2.0, 0.5]), np.array([4.0, 0.0]))
    assert vals.tolist() == [0.5, 0.5] and raw.tolist() == [False, True]


def test_determinism_byte_identical(tmp_path):
    cfg = load_config("siso_rich").with_overrides(horizon=300)
    a = write_outputs(run_experiment(cfg), tmp_path / "a")
    b = write_outputs(run_experiment(cfg), tmp_path / "b")
    assert a["csv"].read_bytes() == b["csv"].read_bytes()
    assert a["summary"].read_bytes() == b["summary"].read_bytes()
    header = a["csv"].read_text().splitlines()[0].split(",")
    assert header == column_names(cfg)


def test_audit_replay_matches_columns():
    cfg = load_config("mimo_stable").with_overrides(horizon=200)
    log = run_experiment(cfg, keep_records=True)
    y_res, x_res = audit_identities(log, cfg)
    assert y_res <= 1e-9 and x_res <= 1e-9
    assert log.column("y_identity_resid").max() <= 1e-9
    assert log.column("x_identity_resid").max() <= 1e-9


def test_siso_reset_bounded_forgetting_flagged():
    cmp = compare_estimators(load_config("siso").with_overrides(horizon=10_000))
    assert cmp.reset_bounded and cmp.forgetting_flagged
    assert cmp.reset.summary["max_p_hat_norm"] < 10
    assert "forgetting_flagged" in cmp.table_text()


def test_pe_input_both_variants_converge():
    cmp = compare_estimators(load_config("siso_rich").with_overrides(horizon=3000), lam=0.99)
    r, f = cmp.reset.summary, cmp.forgetting.summary
    assert r["truncated"] == f["truncated"] == "no"
    assert r["final_p_til_norm"] < 1e-6 and f["final_p_til_norm"] < 1e-6


def test_mimo_unstable_truncates_cleanly():
    for name in ("mimo_pe", "mimo_nonpe"):
        log = run_experiment(load_config(name))
        assert log.summary["truncated"] != "no"
        assert np.isfinite(log.data).all()


def test_summary_is_json_friendly():
    log = run_experiment(load_config("siso").with_overrides(horizon=50))
    json.dumps({k: v for k, v in log.summary.items()})
