import json

import jsonschema
import pytest

from diagforge.circuit import CIRCUIT_SCHEMA
from diagforge.cli import EXIT_INVALID, EXIT_OK, EXIT_TOLERANCE, load_schema, run


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_synth_writes_valid_outputs(tmp_path):
    out, metrics = tmp_path / "c.json", tmp_path / "m.json"
    code = run(["synth", "--phases", "inline:0.1,0.2,0.3,0.4", "--out", str(out), "--metrics", str(metrics)])
    assert code == EXIT_OK
    jsonschema.validate(read_json(out), CIRCUIT_SCHEMA)
    doc = read_json(metrics)
    jsonschema.validate(doc, load_schema("metrics.schema.json"))
    assert doc["subcommand"] == "synth" and doc["width"] == 2 and doc["size"] > 0
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp-")]


def test_metrics_to_stdout(capsys):
    assert run(["synth", "--phases", "random", "--n", "3"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["subcommand"] == "synth"


def test_deterministic_apart_from_timestamp(tmp_path, monkeypatch):
    docs = []
    for k in range(2):
        # same file names in separate directories so the recorded config matches
        run_dir = tmp_path / str(k)
        run_dir.mkdir()
        monkeypatch.chdir(run_dir)
        run(["synth", "--phases", "random", "--n", "4", "--seed", "7", "--metrics", "m.json", "--out", "c.json"])
        doc = read_json(run_dir / "m.json")
        doc.pop("timestamp")
        docs.append(doc)
    assert docs[0] == docs[1]
    assert (tmp_path / "0" / "c.json").read_text() == (tmp_path / "1" / "c.json").read_text()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nonsense"],
        ["synth"],
        ["synth", "--phases", "inline:0.1,0.2,0.3"],
        ["synth", "--phases", "random", "--n", "3", "--sparse-s", "2", "--m-qubits", "1"],
        ["qsp", "--f", "nosuch:1", "--n", "4"],
        ["heat", "--n", "4", "--epsilon", "0.1"],
        ["synth", "--phases", "csv:/nonexistent/path.csv"],
    ],
)
def test_invalid_input_exits_2(argv, capsys):
    assert run(argv) == EXIT_INVALID
    assert capsys.readouterr().err


def test_verify_pass_and_tolerance_failure(tmp_path):
    circuit = tmp_path / "c.json"
    run(["synth", "--phases", "inline:0.1,0.2,0.3,0.4", "--out", str(circuit), "--metrics", str(tmp_path / "s.json")])
    good, bad = tmp_path / "good.json", tmp_path / "bad.json"
    good.write_text(json.dumps({"phases": [0.1, 0.2, 0.3, 0.4]}))
    bad.write_text(json.dumps({"phases": [0.1, 0.2, 0.3, 0.5]}))
    m = tmp_path / "v.json"
    assert run(["verify", "--circuit", str(circuit), "--target", str(good), "--metrics", str(m)]) == EXIT_OK
    assert read_json(m)["details"]["passed"] is True
    assert run(["verify", "--circuit", str(circuit), "--target", str(bad), "--metrics", str(m)]) == EXIT_TOLERANCE
    assert read_json(m)["error"] > 0.05


def test_verify_block_encoding(tmp_path):
    circuit = tmp_path / "c.json"
    assert run(["encode", "--values", "inline:1,0.5,0.25,0.75", "--alpha", "1.2", "--out", str(circuit), "--metrics", str(tmp_path / "e.json")]) == EXIT_OK
    target = tmp_path / "t.json"
    target.write_text(json.dumps({"values": [1, 0.5, 0.25, 0.75], "alpha": 1.2}))
    assert run(["verify", "--circuit", str(circuit), "--target", str(target), "--metrics", str(tmp_path / "v.json")]) == EXIT_OK


def test_malformed_circuit_exits_2(tmp_path):
    circuit, target = tmp_path / "c.json", tmp_path / "t.json"
    circuit.write_text(json.dumps({"width": 1, "gates": [{"kind": "FOO"}]}))
    target.write_text(json.dumps({"phases": [0, 0]}))
    assert run(["verify", "--circuit", str(circuit), "--target", str(target)]) == EXIT_INVALID


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"subcommand": "qsp", "f": "gaussian:0.15", "n": 5, "sparse_s": 4}))
    m1, m2 = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["--config", str(cfg), "--metrics", str(m1)]) == EXIT_OK
    assert run(["qsp", "--config", str(cfg), "--n", "6", "--m-qubits", "3", "--metrics", str(m2)]) == EXIT_OK
    a, b = read_json(m1)["config"], read_json(m2)["config"]
    assert a["n"] == 5 and a["sparse_s"] == 4
    assert b["n"] == 6 and b["m_qubits"] == 3 and b["sparse_s"] is None
    cfg.write_text(json.dumps({"subcommand": "qsp", "bogus": 1}))
    assert run(["--config", str(cfg)]) == EXIT_INVALID


def test_qsp_and_heat_tables(tmp_path):
    table = tmp_path / "q.csv"
    assert run(["qsp", "--f", "gaussian:0.1", "--n", "5", "--csv", str(table), "--metrics", str(tmp_path / "q.json")]) == EXIT_OK
    assert table.read_text().splitlines()[0] == "index,x,prepared,target"
    assert len(table.read_text().splitlines()) == 33
    heat = tmp_path / "h.csv"
    code = run(["heat", "--n", "5", "--kappa", "1.0", "--t", "0.001", "0.01", "--csv", str(heat), "--metrics", str(tmp_path / "h.json")])
    assert code == EXIT_OK
    assert len(heat.read_text().splitlines()) == 1 + 2 * 32


def test_bench_tiny_manifest(tmp_path, monkeypatch):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"version": 1, "runs": [
        {"name": "tiny_qsp", "kind": "qsp", "f": "gaussian:0.15", "n": 5, "sparse_s": 4},
        {"name": "tiny_rus", "kind": "rus", "f": "gaussian:0.1", "n": 5, "rounds": 3},
        {"name": "tiny_p", "kind": "psuccess", "f": "gaussian:0.1", "n": [4, 5]},
    ]}))
    monkeypatch.setenv("DIAGFORGE_THREADS", "2")
    out = tmp_path / "bench"
    assert run(["bench", "--manifest", str(manifest), "--out-dir", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["bench_metrics.json", "tiny_p.csv", "tiny_qsp.csv", "tiny_rus.csv"]
    doc = read_json(out / "bench_metrics.json")
    assert doc["details"]["threads"] == 2
    assert len((out / "tiny_rus.csv").read_text().splitlines()) == 4
    assert run(["bench", "--manifest", str(manifest), "--only", "missing", "--out-dir", str(out)]) == EXIT_INVALID
    monkeypatch.setenv("DIAGFORGE_THREADS", "zero")
    assert run(["bench", "--manifest", str(manifest), "--out-dir", str(out)]) == EXIT_INVALID
