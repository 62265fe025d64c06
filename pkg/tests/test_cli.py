import json
import subprocess
import sys

import numpy as np
import pytest

from torusnf.cli import main
from torusnf.factory import obstruction_instance
from torusnf.homology import QuadraticForm
from torusnf.instances import InstanceError, InstanceSpec, dump_json, load_instance


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("inst")
    assert main(["factory", "--out", str(root / "factory"), "--count", "2", "--quiet"]) == 0
    assert main(["factory", "--out", str(root / "obs"), "--count", "1", "--kind", "obstruction", "--quiet"]) == 0
    a3 = {"dim": 2, "omega": [[1, 0], [0, 1]], "degree_cap": 9, "hamiltonian": [
        {"j": [2, 0], "k": [0, 0], "re": 1.0, "im": 0.0},
        {"j": [0, 2], "k": [0, 0], "re": 1.0, "im": 0.0},
        {"j": [4, 0], "k": [0, 0], "re": 0.3, "im": 0.0}]}
    (root / "a3.json").write_text(json.dumps(a3))
    normal = {"dim": 1, "omega": [[1.0]], "b": [0.1], "degree_cap": 9, "generator": []}
    (root / "normal.json").write_text(json.dumps(normal))
    return {"f0": str(root / "factory" / "factory-00.json"), "f1": str(root / "factory" / "factory-01.json"),
            "obs": str(root / "obs" / "obstruction-00.json"), "a3": str(root / "a3.json"),
            "normal": str(root / "normal.json"), "root": root}


def read(path):
    return json.loads(open(path).read())


def test_run_success_and_report(files, tmp_path):
    rep = tmp_path / "r.json"
    assert main(["run", files["f0"], "--steps", "3", "--report", str(rep), "--quiet"]) == 0
    doc = read(rep)
    assert doc["status"] == "ok" and doc["schema_version"] == 1
    assert doc["m_sequence"] == [2, 3, 5, 9]
    assert [s["m_next"] for s in doc["steps"]] == [3, 5, 9]
    assert len(doc["instance"]["sha256"]) == 64
    spec = load_instance(files["f0"])
    for j, bj in enumerate(spec.b, start=2):
        assert doc["b_original"][f"b{j}"] == pytest.approx(bj, rel=1e-8)


def test_run_obstruction_exit_code(files, tmp_path):
    rep = tmp_path / "r.json"
    assert main(["run", files["obs"], "--report", str(rep), "--quiet"]) == 2
    doc = read(rep)
    assert doc["status"] == "obstruction" and doc["obstruction"]["residue"] >= 1e-3


def test_run_a3_exit_code(files):
    assert main(["run", files["a3"], "--steps", "2", "--quiet"]) == 3


def test_run_schedule_failure_exit_code(files, tmp_path):
    rep = tmp_path / "r.json"
    assert main(["run", files["f1"], "--mode", "compliant", "--scale", "1", "--report", str(rep), "--quiet"]) == 4
    doc = read(rep)
    assert doc["status"] == "estimate_failed" and doc["steps"][0]["flags"]["est_R"] is False


def test_run_compliant_success(files, tmp_path):
    rep = tmp_path / "r.json"
    assert main(["run", files["f1"], "--mode", "compliant", "--report", str(rep), "--quiet"]) == 0
    doc = read(rep)
    assert 0 < doc["scale"] < 1
    assert all(v is not False for s in doc["steps"] for v in s["flags"].values())


def test_run_degree_budget_exit_code(files, tmp_path):
    rep = tmp_path / "r.json"
    assert main(["run", files["f0"], "--steps", "5", "--report", str(rep), "--quiet"]) == 1
    assert "DegreeBudgetExceeded" in read(rep)["error"]


@pytest.mark.parametrize("patch,field", [
    ({"dim": 0}, "dim"),
    ({"omega": [[1, 2], [3, 4]]}, "omega"),
    ({"omega": [[1.0]]}, "omega"),
    ({"degree_cap": "x"}, "degree_cap"),
    ({"mode": "fast"}, "mode"),
    ({"b": ["a"]}, "b"),
    ({"tolerances": {"divisibility": -1}}, "tolerances"),
    ({"hamiltonian": []}, "generator"),
    ({"generator": [{"j": [1], "k": [0, 1], "re": 1.0}]}, "generator"),
])
def test_malformed_instance_names_the_field(files, tmp_path, capsys, patch, field):
    doc = read(files["f1"])
    doc.update(patch)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["run", str(path)]) == 1
    assert repr(field) in capsys.readouterr().err
    with pytest.raises(InstanceError) as info:
        load_instance(path)
    assert info.value.field == field


def test_unreadable_instance(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["run", str(path), "--quiet"]) == 1
    assert main(["run", str(tmp_path / "missing.json"), "--quiet"]) == 1


def test_reports_are_deterministic(files, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for rep in (a, b):
        assert main(["run", files["f1"], "--steps", "3", "--report", str(rep), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_suite_runs_in_input_order(files, tmp_path):
    rep = tmp_path / "s.json"
    code = main(["run", files["obs"], files["f0"], "--suite", "--jobs", "2", "--report", str(rep), "--quiet"])
    assert code == 2
    doc = read(rep)
    assert [r["instance"]["name"] for r in doc["runs"]] == ["obstruction-00", "factory-00"]
    assert main(["verify", str(rep), "--quiet"]) == 0


def test_several_instances_need_suite_flag(files):
    assert main(["run", files["f0"], files["f1"]]) == 1


def test_oracle_and_diff(files, tmp_path):
    run_rep, orc = tmp_path / "r.json", tmp_path / "o.json"
    assert main(["run", files["f1"], "--report", str(run_rep), "--quiet"]) == 0
    assert main(["oracle", files["f1"], "--degree", "9", "--diff", str(run_rep), "--report", str(orc),
                 "--quiet"]) == 0
    doc = read(orc)
    assert doc["diff"]["passed"] and doc["diff"]["max_rel_diff"] <= 1e-8
    spec = load_instance(files["f1"])
    for j, bj in enumerate(spec.b, start=2):
        assert doc["b_fit"][f"b{j}"] == pytest.approx(bj, rel=1e-8)


def test_oracle_diff_against_compliant_run(files, tmp_path):
    run_rep, orc = tmp_path / "r.json", tmp_path / "o.json"
    assert main(["run", files["f1"], "--mode", "compliant", "--report", str(run_rep), "--quiet"]) == 0
    assert main(["oracle", files["f1"], "--degree", "9", "--diff", str(run_rep), "--report", str(orc),
                 "--quiet"]) == 0
    assert read(orc)["diff"]["max_rel_diff"] <= 1e-8


def test_oracle_on_normal_input(files, tmp_path):
    orc = tmp_path / "o.json"
    assert main(["oracle", files["normal"], "--report", str(orc), "--quiet"]) == 0
    assert read(orc)["generator"] == {}


def test_oracle_obstruction(files):
    assert main(["oracle", files["obs"], "--quiet"]) == 2


def test_schedule_command(tmp_path):
    rep = tmp_path / "s.json"
    assert main(["schedule", "--dim", "4", "--rho0", "1", "--horizon", "30", "--report", str(rep), "--quiet"]) == 0
    doc = read(rep)
    assert doc["passed"] and len(doc["rows"]) == 5 * 30
    assert main(["schedule", "--dim", "1", "--rho0", "1", "--quiet"]) == 0


def test_schedule_validation():
    assert main(["schedule", "--dim", "1", "--rho0", "0", "--quiet"]) == 1


def test_verify_detects_tampering(files, tmp_path):
    rep = tmp_path / "r.json"
    assert main(["run", files["f0"], "--report", str(rep), "--quiet"]) == 0
    assert main(["verify", str(rep), "--quiet"]) == 0
    doc = read(rep)
    doc["steps"][1]["m_next"] = 6
    doc["b_fit"]["b2"] += 1e-3
    dump_json(doc, rep)
    assert main(["verify", str(rep), "--quiet"]) == 1


def test_instance_round_trip(files):
    spec = load_instance(files["f0"])
    again = InstanceSpec.from_dict(json.loads(dump_json(spec.to_dict())), name=spec.name)
    assert again.build_hamiltonian().identical(spec.build_hamiltonian())


def test_random_generator_instances_follow_seed(tmp_path):
    doc = {"dim": 2, "omega": [[1, 0], [0, 2]], "b": [0.1], "degree_cap": 9, "seed": 3,
           "generator": {"random": {"amplitude": 0.02}}}
    p = tmp_path / "r.json"
    p.write_text(json.dumps(doc))
    rep1, rep2 = tmp_path / "1.json", tmp_path / "2.json"
    assert main(["run", str(p), "--report", str(rep1), "--quiet"]) == 0
    assert main(["run", str(p), "--seed", "4", "--report", str(rep2), "--quiet"]) == 0
    assert read(rep1)["steps"][1]["F"] != read(rep2)["steps"][1]["F"]


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "torusnf", "run", files["obs"]], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "obstruction" in proc.stdout


def test_obstruction_instance_file_is_valid(tmp_path):
    om = QuadraticForm(np.diag([1.0, 2.0]))
    spec = InstanceSpec(2, om, (), 9, hamiltonian=obstruction_instance(om, 9, 5))
    p = tmp_path / "o.json"
    dump_json(spec.to_dict(), p)
    assert main(["run", str(p), "--quiet"]) == 2


def test_non_real_generator_is_rejected(files, tmp_path, capsys):
    doc = read(files["f1"])
    doc["generator"] = doc["generator"][:1]
    path = tmp_path / "half.json"
    path.write_text(json.dumps(doc))
    assert main(["run", str(path)]) == 1
    assert "'generator'" in capsys.readouterr().err
