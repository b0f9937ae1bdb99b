import json

import pytest

from peergrade import reproduce
from peergrade.cli import EXIT_INVALID, EXIT_OK, EXIT_REPRO, main
from peergrade.noise import identity, load_matrix


def test_weights_k2(tmp_path, capsys):
    assert main(["weights", "--matrix", "identity", "--k", "2", "--cache-dir", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "3x3" in out and "total weight 1/2" in out and "[ok]" in out
    files = list(tmp_path.iterdir())
    data = json.loads(files[0].read_text())
    assert data["rows"][0][0] == "1/18"
    before = files[0].read_bytes()
    main(["weights", "--matrix", "identity", "--k", "2", "--cache-dir", str(tmp_path)])
    assert files[0].read_bytes() == before


def test_optimize_identity_is_borda(tmp_path, capsys):
    out = tmp_path / "o.json"
    assert main(["optimize", "--matrix", "identity", "--k", "4", "--objective", "all", "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    for name, r in report.items():
        assert r["predicted_percent"] == r["borda_predicted_percent"]
    assert "all2all: optimal" in capsys.readouterr().out


def test_optimize_mallows(cache_dir, tmp_path, capsys):
    out = tmp_path / "o.json"
    assert main(["optimize", "--cache-dir", cache_dir, "--out", str(out), "--precision", "2"]) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["predicted_percent"] == 85.16   # 85.1586 before rounding
    assert data["ordered"][1] == [1, 1, 1, 1, 1, 6]
    assert data["plan"]["histogram"]["max"] == 20


def test_simulate_reproducible(tmp_path, capsys):
    args = ["simulate", "--model", "perfect", "--rules", "borda,borda-lex", "--n", "300", "--runs", "2", "--seed", "4"]
    main(args + ["--out", str(tmp_path / "a.csv")])
    main(args + ["--out", str(tmp_path / "b.csv"), "--threads", "2"])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 1 + 2 * 2


def test_estimate_noise_perfect(tmp_path):
    out = tmp_path / "m.json"
    assert main(["estimate-noise", "--model", "perfect", "--k", "4", "--samples", "50", "--out", str(out)]) == EXIT_OK
    assert load_matrix(out).entries == identity(4).entries


def test_estimate_then_optimize(tmp_path, capsys):
    out = tmp_path / "m.json"
    main(["estimate-noise", "--k", "3", "--samples", "500", "--seed", "1", "--out", str(out)])
    assert main(["optimize", "--matrix", str(out), "--k", "3"]) == EXIT_OK


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"matrix": "identity", "k": 2, "cache-dir": str(tmp_path / "w")}))
    assert main(["weights", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "w").exists()
    # explicit flags win over the file
    assert main(["weights", "--config", str(cfg), "--k", "3"]) == EXIT_OK
    assert "10x10" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["optimize", "--matrix", "nosuch"],
    ["optimize", "--objective", "th-200%"],
    ["simulate", "--model", "oracle"],
    ["simulate", "--n", "5", "--k", "6", "--rules", "borda"],
    ["weights", "--matrix", "identity"],
    ["weights", "--matrix", "mallows6", "--k", "4"],
])
def test_invalid_input_exit_code(argv, capsys):
    assert main(argv) == EXIT_INVALID
    assert "error:" in capsys.readouterr().err


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["weights", "--config", str(cfg)]) == EXIT_INVALID


def test_reproduce_exit_codes(cache_dir, monkeypatch, capsys):
    assert main(["reproduce", "table5", "--cache-dir", cache_dir]) == EXIT_OK
    out = capsys.readouterr().out
    assert "mallows6 position 2" in out and "-- table5: 14/14" in out
    failing = lambda ctx: [reproduce.Check("broken", 1.0, 2.0, 0.1)]
    monkeypatch.setitem(reproduce.RUNNERS, "table5", failing)
    assert main(["reproduce", "table5"]) == EXIT_REPRO
