import csv
import io
import json
import subprocess
import sys

import pytest

from pgsim.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_sticks_csv(capsys):
    code, out, err = run(capsys, "sample-sticks", "--kind", "pg", "--alpha", "0.5",
                         "--zeta", "gamma:2", "--n", "4", "--size", "2", "--seed", "3")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["rep", "k", "W"] and len(rows) == 9
    assert all(0 < float(r[2]) < 1 for r in rows[1:])
    assert "2 stream(s)" in err


def test_sample_bridge_json_sums_to_one(capsys):
    code, out, _ = run(capsys, "sample-bridge", "--kind", "pd", "--alpha", "0.4", "--theta", "1",
                       "--trunc", "1e-4", "--format", "json")
    d = json.loads(out)
    assert code == 0
    assert sum(p for _, p in d["atoms"]) + d["dust"] == pytest.approx(1.0, abs=1e-12)


def test_sample_bridge_csv_has_dust_row(capsys):
    _, out, _ = run(capsys, "sample-bridge", "--kind", "epg", "--alpha", "0.5", "--zeta", "const:1",
                    "--trunc", "1e-3")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["location", "weight"] and rows[-1][0] == "dust"


def test_sample_partition_deterministic(capsys):
    argv = ["sample-partition", "--kind", "pd", "--alpha", "0.5", "--theta", "0", "--n", "10",
            "--seed", "1", "--size", "5"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0][:2] == ["n", "K_n"]
    for r in rows[1:]:
        sizes = [int(x) for x in r[2:] if x]
        assert sum(sizes) == 10 and len(sizes) == int(r[1])


def test_sample_partition_json(capsys):
    _, out, _ = run(capsys, "sample-partition", "--kind", "pg", "--alpha", "0.3", "--zeta", "zero",
                    "--n", "6", "--format", "json")
    blocks = json.loads(out)[0]
    assert sorted(x for b in blocks for x in b) == list(range(1, 7))


@pytest.mark.parametrize("chain", ["v", "w", "q"])
def test_run_chain(capsys, chain):
    code, out, _ = run(capsys, "run-chain", "--chain", chain, "--alpha", "0.5", "--zeta", "const:1",
                       "--steps", "3")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["k", "T_hat", "diversity", "factor", "waiting_time"]
    assert len(rows) == 5


def test_density_table_delta(capsys):
    code, out, _ = run(capsys, "density-table", "--which", "delta", "--alpha", "0.5",
                       "--grid", "0:5:0.01")
    rows = {round(float(x), 6): float(v) for x, v in list(csv.reader(io.StringIO(out)))[1:]}
    assert code == 0 and len(rows) == 501
    assert rows[1.0] == pytest.approx(0.15915494309189535, rel=1e-12)


def test_density_table_needs_theta(capsys):
    code, _, err = run(capsys, "density-table", "--which", "poly", "--alpha", "0.5",
                       "--grid", "0.1:1:0.1")
    assert code == 2 and "--theta" in err


def test_verify_subset(capsys):
    code, out, err = run(capsys, "verify", "--alpha", "0.5", "--zeta", "gamma:2", "--n", "20000",
                         "--ids", "keydd,gammaid", "--seed", "7")
    reps = json.loads(out)
    assert code == 0 and [r["verdict"] for r in reps] == ["pass", "pass"]
    assert "2/2" in err


def test_bad_alpha_exit_code(capsys):
    code, _, err = run(capsys, "sample-sticks", "--kind", "pd", "--alpha", "1.5", "--theta", "0")
    assert code == 2 and "error" in err


def test_missing_flag_exit_code(capsys):
    code, _, _ = run(capsys, "sample-sticks", "--kind", "pd")
    assert code == 2


def test_output_file(tmp_path, capsys):
    path = tmp_path / "w.csv"
    run(capsys, "sample-sticks", "--kind", "pd", "--alpha", "0.5", "--theta", "1", "-o", str(path))
    assert path.read_text().startswith("rep,k,W\n")


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pgsim", "sample-sticks", "--kind", "pd",
                          "--alpha", "0.5", "--theta", "1", "--n", "2"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.count("\n") == 3
