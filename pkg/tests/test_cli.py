import subprocess
import sys

from eotrack.cli import main
from eotrack.consensus import read_edge_list

SMALL = "[scenario]\nn_scans = 4\n[network]\nnodes = 4\nside = 1.0\n"


def test_run_and_plot(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL)
    out = tmp_path / "res"
    assert main(["run", str(cfg), "--out", str(out), "--variants", "dVBEOT,dVBEOT_no_R", "--seed", "2"]) == 0
    text = capsys.readouterr().out
    assert "dVBEOT" in text and "dVBEOT_no_R" in text
    assert (out / "records.csv").is_file()
    assert main(["plot-data", str(out), "--kind", "rgwe-vs-scan"]) == 0
    assert (out / "plots" / "rgwe-vs-scan.csv").is_file()
    assert main(["plot-data", str(out)]) == 0


def test_validate_prints_config(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL)
    assert main(["validate", str(cfg), "--scenario", "S2"]) == 0
    text = capsys.readouterr().out
    assert "id = S2" in text and "vb_iters = 80" in text


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nrate = x\n")
    assert main(["validate", str(bad)]) == 2
    assert "scenario.rate" in capsys.readouterr().err
    assert main(["run", str(bad)]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["plot-data", str(tmp_path / "missing")]) == 1
    assert main(["--help"]) == 0


def test_gen_network(tmp_path):
    path = tmp_path / "net.txt"
    assert main(["gen-network", str(path), "--nodes", "7", "--seed", "5"]) == 0
    net = read_edge_list(path)
    assert net.n_nodes == 7
    again = tmp_path / "net2.txt"
    main(["gen-network", str(again), "--nodes", "7", "--seed", "5"])
    assert path.read_bytes() == again.read_bytes()


def test_console_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eotrack.cli", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0 and "[experiment]" in proc.stdout
