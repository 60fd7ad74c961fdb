import json
import math

import pytest

from dskg.cli import dumps, main


def _run(tmp_path, command, config=None, *extra):
    args = [command, "--out", str(tmp_path)]
    if config is not None:
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        args += ["--config", str(path)]
    code = main(args + list(extra))
    out = tmp_path / f"{command.replace('-', '_')}.json"
    return code, json.loads(out.read_text())


def test_geometry_without_rotation(tmp_path):
    code, doc = _run(tmp_path, "geometry", {"a": 0.0})
    assert code == 0 and doc["status"] == "ok"
    res = doc["result"]
    assert abs(res["r_minus"] - 2.09) < 5e-3 and abs(res["r_plus"] - 8.79) < 5e-3
    assert res["Omega_minus"] == 0 and res["Omega_plus"] == 0 and res["ell"] == 0
    assert (tmp_path / "geometry.csv").read_text().startswith("x,")


def test_assemble_without_rotation(tmp_path):
    code, doc = _run(tmp_path, "assemble", {"a": 0.0, "nx": 59, "X": 20.0, "n_theta": 3, "Q": 3})
    assert code == 0
    res = doc["result"]
    assert res["ell"] == 0.0 and res["k_norm"] == 0.0
    checks = res["hypothesisChecks"]
    assert all(checks[k] for k in ("h0_symmetric", "k_symmetric", "h0_nonnegative", "cutoff_identities"))


def test_selftest_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["selftest", "--out", str(a)]) == 0
    assert main(["selftest", "--out", str(b)]) == 0
    for name in ("selftest.json", "selftest.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert json.loads((a / "selftest.json").read_text())["result"]["passed"] is True


@pytest.mark.parametrize("config", [{"bogus": 1}, {"nx": -3}, {"side": "up"}, [1, 2]])
def test_invalid_config_exit_code(tmp_path, config):
    code, doc = _run(tmp_path, "evolve", config)
    assert code == 2
    assert doc["status"] == "error" and doc["error"] == "ConfigInvalid"


def test_unreadable_config(tmp_path):
    assert main(["geometry", "--out", str(tmp_path), "--config", str(tmp_path / "missing.json")]) == 2


def test_dumps_format():
    text = dumps({"b": 1.0, "a": [0.1, float("nan")], "c": None, "d": True})
    assert text.index('"a"') < text.index('"b"')
    assert "0.10000000000000001" in text and "null" in text
    assert math.isclose(json.loads(text)["b"], 1.0)
