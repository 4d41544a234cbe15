import json
import math

import pytest

from ehresmann.cli import main
from ehresmann.config import canonical_json, parse_config_text, run_config

SCALAR = """
seed = 1
[bundle]
base = ["x1"]
fiber = ["f1"]
[connection]
gamma = [["cos(x1)*f1"]]
[curve.line]
x = ["t"]
t1 = 2.0
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_transport_pass(tmp_path, capsys):
    exact = 1.5 * math.exp(-math.sin(2.0))
    cfg = SCALAR + f"""
[task.1]
kind = "transport"
curve = "line"
f0 = [1.5]
expect = [{exact!r}]
steps = 200
"""
    assert main(["run", _write(tmp_path, cfg)]) == 0
    assert "PASS" in capsys.readouterr().out


def test_verdict_failure_exit_1(tmp_path):
    cfg = SCALAR + """
[task.1]
kind = "transport"
curve = "line"
f0 = [1.5]
expect = [0.0]
"""
    assert main(["run", _write(tmp_path, cfg)]) == 1


def test_numeric_abort_exit_3(tmp_path):
    cfg = """
[bundle]
base = ["x1"]
fiber = ["f1"]
[connection]
gamma = [["f1^2"]]
[curve.line]
x = ["t"]
[task.1]
kind = "transport"
curve = "line"
f0 = [-1000.0]
steps = 100
"""
    assert main(["run", _write(tmp_path, cfg)]) == 3


@pytest.mark.parametrize("text", [
    "seed = [",                                          # TOML syntax
    SCALAR.replace("cos(x1)*f1", "cos(x1)*"),            # bad expression
    SCALAR.replace("cos(x1)*f1", "q*f1"),                # unknown variable
    SCALAR + '[task.1]\nkind = "nonsense"\n',            # schema
    SCALAR + '[task.1]\nkind = "transport"\ncurve = "nope"\n' + "bogus = 1\n",
])
def test_config_errors_exit_2(tmp_path, capsys, text):
    assert main(["run", _write(tmp_path, text)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_file_and_bad_args(tmp_path):
    assert main(["run", str(tmp_path / "absent.toml")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 2
    assert main(["run", _write(tmp_path, SCALAR), "--steps", "1"]) == 2


def test_empty_task_list(tmp_path):
    assert main(["run", _write(tmp_path, SCALAR)]) == 0


def test_check_command(tmp_path, capsys):
    assert main(["check", _write(tmp_path, SCALAR)]) == 0
    assert "ok" in capsys.readouterr().out
    assert main(["check", _write(tmp_path, "seed = [", "bad.toml")]) == 2


def test_structured_output_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["run", "so3", "--format", "structured", "--out", str(out1)]) == 0
    assert main(["run", "so3", "--format", "structured", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    tree = json.loads(out1.read_text())
    assert tree["passed"] and tree["exit_code"] == 0
    assert [t["index"] for t in tree["tasks"]] == sorted(t["index"] for t in tree["tasks"])


def test_seed_changes_random_samples():
    from ehresmann.config import resolve_config
    cfg = parse_config_text(resolve_config("so3")[1])
    a = canonical_json(run_config(cfg, seed=1).as_tree())
    b = canonical_json(run_config(cfg, seed=2).as_tree())
    assert a != b


@pytest.mark.parametrize("name", ["monopole", "sphere", "so3"])
def test_bundled_configs_pass(name):
    assert main(["run", name]) == 0


def test_canonical_json_format():
    s = canonical_json({"b": 0.1, "a": [1, 2.5], "c": float("nan")})
    assert s.index('"a"') < s.index('"b"')
    assert "0.10000000000000001" in s
    assert '"nan"' in s


def test_monopole_report_content():
    from ehresmann.config import resolve_config
    tree = run_config(parse_config_text(resolve_config("monopole")[1]), seed=7).as_tree()
    tasks = {t["kind"]: t["results"] for t in tree["tasks"]}
    # the integration region excises small caps at the poles
    assert abs(tasks["flux"]["value"][0] - 2 * math.pi) <= 1e-5
    assert tasks["flux"]["expect_diff"] <= 1e-8
    assert tasks["flux"]["gauge_invariant"]
    assert abs(tasks["holonomy"]["angle"] - tasks["holonomy"]["stokes_angle"]) <= 1e-8
