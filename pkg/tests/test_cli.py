import json
import subprocess
import sys

import pytest

from wdvvkit.cli import main


@pytest.fixture
def cache(tmp_path, monkeypatch):
    # main() exports the cache dir to the environment; let monkeypatch restore it
    monkeypatch.setenv("WDVVKIT_CACHE", str(tmp_path / "cache"))
    return tmp_path / "cache"


def test_show_matrix(capsys):
    assert main(["show", "K"]) == 0
    out = capsys.readouterr().out
    assert "-2" in out


def test_unknown_dataset_is_usage_error(capsys):
    assert main(["show", "nope"]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["expand", "--branch", "1"])
    assert exc.value.code == 2


def test_bad_branch_is_usage_error(cache):
    assert main(["--cache-dir", str(cache), "expand", "--n", "4", "--branch", "9", "--depth", "1"]) == 2


def test_schouten_pass(cache, tmp_path, capsys):
    mf = tmp_path / "m.json"
    assert main(["--cache-dir", str(cache), "--manifest", str(mf), "schouten", "K", "K"]) == 0
    doc = json.loads(mf.read_text())
    assert doc["schema"] == "wdvvkit.manifest" and doc["status"] == "pass"
    assert all(c["verdict"] == "pass" for c in doc["checks"])
    assert "status: pass" in capsys.readouterr().out


def test_curvature_g6(cache, capsys):
    assert main(["--cache-dir", str(cache), "--json", "curvature", "g6"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "pass"


def test_verify_n3_is_cached_and_deterministic(cache, tmp_path):
    m1, m2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["--cache-dir", str(cache), "--manifest", str(m1), "verify", "n3"]) == 0
    assert list((cache / "verdicts").glob("*.json"))
    assert main(["--cache-dir", str(cache), "--manifest", str(m2), "verify", "n3"]) == 0
    assert m1.read_bytes() == m2.read_bytes()
    m3 = tmp_path / "c.json"
    assert main(["--cache-dir", str(cache), "--fresh", "--manifest", str(m3), "verify", "n3"]) == 0
    strip = lambda d: [{k: v for k, v in c.items() if k != "elapsed"} for c in d["checks"]]  # noqa: E731
    assert strip(json.loads(m1.read_text())) == strip(json.loads(m3.read_text()))


def test_n3_reconstruct_reports_failure(cache, capsys):
    assert main(["--cache-dir", str(cache), "--json", "reconstruct", "--n", "3"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert "ratio to target" in doc["checks"][-2]["detail"]


def test_budget_exceeded_exit_3(cache, tmp_path):
    mf = tmp_path / "m.json"
    code = main(
        ["--cache-dir", str(cache), "--manifest", str(mf), "reconstruct", "--n", "4", "--budget-time", "0.5"]
    )
    assert code == 3
    doc = json.loads(mf.read_text())
    assert doc["status"] == "budget-exceeded"
    assert any(c["verdict"] == "budget-exceeded" for c in doc["checks"])
    assert not (cache / "verdicts").exists() or not list((cache / "verdicts").glob("*.json"))


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "wdvvkit.cli", "show", "psi6"], capture_output=True, text=True)
    assert out.returncode == 0 and "a[5,0]" in out.stdout
