import io
import subprocess
import sys

import numpy as np
import pytest

from duetface.channel_split import SplitSpec
from duetface.cli import main
from duetface.color_frequency import read_ppm, write_ppm
from duetface.corpus import corpus_images


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def image():
    return str(corpus_images()[1])


def test_energy_report(image):
    code, text = run("energy-report", "--image", image)
    assert code == 0
    lines = text.splitlines()
    top = lines[lines.index("# cumulative luma energy of the top-k channels") + 2:]
    assert len(top) == 64
    assert top[0].split()[1] == "0"
    assert float(top[9].split()[-1]) >= 0.85


def test_energy_report_gray(tmp_path):
    write_ppm(tmp_path / "g.ppm", np.full((16, 16, 3), 100, np.uint8))
    code, text = run("energy-report", "--image", str(tmp_path / "g.ppm"))
    rows = [l.split() for l in text.splitlines()[2:194]]
    assert sum(float(r[-1]) != 0 for r in rows) == 1


@pytest.mark.parametrize("k, gray", [("0", "x_c.ppm"), ("64", "x_s.ppm")])
def test_split_boundaries(image, tmp_path, k, gray):
    code, _ = run("split", "--image", image, "--k", k, "--outdir", str(tmp_path))
    assert code == 0
    assert np.all(read_ppm(tmp_path / gray) == 128)
    assert SplitSpec.load(tmp_path / "spec.txt").k == int(k)


def test_split_default(image, tmp_path):
    code, text = run("split", "--image", image, "--outdir", str(tmp_path))
    assert code == 0 and "passed=true" in text
    assert read_ppm(tmp_path / "x_s.ppm").shape == (112, 112, 3)


def test_demo_is_deterministic(image):
    a = run("demo", "--image", image)
    b = run("demo", "--image", image)
    assert a == b and a[0] == 0
    text = a[1]
    assert "comm_total=35917" in text and "comm_total_paper=35525" in text
    assert "repeat_cosine=1.000000" in text
    assert "mask_sizes=56x56,28x28,14x14,7x7" in text


def test_demo_full_mode_cost(image):
    code, text = run("demo", "--image", image, "--mode", "full")
    assert "comm_total=2036293" in text


def test_config_file(image, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nk = 4\nmode=full\n")
    _, text = run("demo", "--image", image, "--config", str(cfg))
    assert "k=4" in text and "mode=full" in text
    _, text = run("demo", "--image", image, "--config", str(cfg), "--k", "10")
    assert "k=10" in text
    cfg.write_text("bogus=1\n")
    assert run("demo", "--image", image, "--config", str(cfg))[0] == 2


def test_eval_privacy(tmp_path):
    src = corpus_images()[0]
    (tmp_path / src.name).write_bytes(src.read_bytes())
    code, text = run("eval-privacy", "--corpus", str(tmp_path), "--ks", "1,4,10")
    assert code == 0
    rows = [l for l in text.splitlines() if l.startswith(src.stem + " ")]
    assert len(rows) == 3
    assert f"monotone[{src.stem}]=true" in text


def test_eval_privacy_empty_corpus(tmp_path):
    assert run("eval-privacy", "--corpus", str(tmp_path))[0] == 2


def test_errors_exit_nonzero(tmp_path):
    assert run("energy-report", "--image", str(tmp_path / "missing.ppm"))[0] == 1
    assert run("demo", "--image", str(tmp_path / "missing.ppm"))[0] == 1


def test_invalid_k_is_usage_error(image, tmp_path):
    assert run("split", "--image", image, "--k", "65", "--outdir", str(tmp_path))[0] == 2


def test_serve_and_query_subprocess(image, tmp_path):
    weights = tmp_path / "w"
    assert run("init-weights", "--out", str(weights), "--k", "10")[0] == 0
    proc = subprocess.Popen(
        [sys.executable, "-m", "duetface.cli", "serve", "--listen", "127.0.0.1:0", "--weights", str(weights), "--mode", "compact"],
        stdout=subprocess.PIPE,
        text=True,
    )
    try:
        line = proc.stdout.readline()
        assert line.startswith("listening on ")
        addr = line.split()[-1]
        out = tmp_path / "emb.tensor"
        code, text = run("query", "--image", image, "--server", addr, "--out", str(out), "--query-id", "5")
        assert code == 0 and "query_id=5" in text and "elements=35917" in text
        assert out.stat().st_size == 1 + 4 + 256 * 4
    finally:
        proc.terminate()
        proc.wait(10)


def test_help_for_every_command():
    for cmd in ("energy-report", "split", "demo", "serve", "query", "eval-privacy", "init-weights"):
        r = subprocess.run([sys.executable, "-m", "duetface.cli", cmd, "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "usage" in r.stdout
