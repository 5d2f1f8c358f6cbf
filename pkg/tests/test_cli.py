import csv
import io
import shutil
import subprocess
import sys

import pytest

from apixelhop.cli import main
from apixelhop.store import save
from conftest import published_config_model

TINY_FLAGS = ["--blocks-per-image", "8", "--n-trees", "5", "--max-depth", "2", "--val-frac", "0.25"]


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "apixelhop", *map(str, args)], capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


@pytest.fixture(scope="module")
def cli_model(tiny_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "model.json"
    code = main(["train", "--real", str(tiny_corpus / "real"), "--fake", str(tiny_corpus / "fake"),
                 "--out", str(out), "--quiet", *TINY_FLAGS])
    assert code == 0
    return out


def test_train_prints_bank(tiny_corpus, tmp_path, capsys):
    code = main(["train", "--real", str(tiny_corpus / "real"), "--fake", str(tiny_corpus / "fake"),
                 "--out", str(tmp_path / "m.json"), "--quiet", "--n-sel", "2",
                 "--report-channels", str(tmp_path / "ch.csv"), "--manifest", str(tmp_path / "man.csv"),
                 *TINY_FLAGS])
    out = capsys.readouterr().out
    assert code == 0
    assert "bank size: 6" in out
    assert "Total" in out
    assert (tmp_path / "ch.csv").exists()
    assert (tmp_path / "man.csv").read_text().startswith("path,label,split\n")


def test_missing_flag_is_usage_error(tiny_corpus):
    code, _, err = run_cli("train", "--real", tiny_corpus / "real", "--out", "x.json")
    assert code == 2
    assert "usage" in err


def test_unknown_flag_is_usage_error():
    assert run_cli("inspect", "--model", "m.json", "--bogus")[0] == 2


def test_predict_rows(cli_model, tiny_corpus, capsys):
    paths = [str(tiny_corpus / "real" / "00000.png"), str(tiny_corpus / "fake" / "00000.png"),
             str(tiny_corpus / "fake" / "00001.png")]
    assert main(["predict", "--model", str(cli_model), *paths]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert [r[0] for r in rows] == paths
    assert all(0 < float(r[1]) < 1 and r[2] in ("real", "fake") for r in rows)
    assert main(["predict", "--model", str(cli_model), *paths]) == 0
    assert list(csv.reader(io.StringIO(capsys.readouterr().out))) == rows


def test_predict_skips_corrupt(cli_model, tiny_corpus, tmp_path, capsys):
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"\x89PNG garbage")
    paths = [str(tiny_corpus / "real" / "00000.png"), str(bad), str(tiny_corpus / "fake" / "00000.png")]
    assert main(["predict", "--model", str(cli_model), *paths]) == 1
    captured = capsys.readouterr()
    assert len(captured.out.splitlines()) == 2
    assert "broken.png" in captured.err


def test_predict_dump_attention(cli_model, tiny_corpus, tmp_path, capsys):
    img = tiny_corpus / "fake" / "00002.png"
    assert main(["predict", "--model", str(cli_model), "--header", "--dump-attention", str(tmp_path), str(img)]) == 0
    assert capsys.readouterr().out.startswith("path,score,label\n")
    assert (tmp_path / "00002_attention.png").exists()


def test_predict_bad_model(tmp_path):
    (tmp_path / "m.json").write_text("{}")
    assert main(["predict", "--model", str(tmp_path / "m.json"), "x.png"]) == 1


def eval_rows(capsys):
    return list(csv.DictReader(io.StringIO(capsys.readouterr().out)))


def test_eval_one_subset(cli_model, tiny_corpus, capsys):
    assert main(["eval", "--model", str(cli_model), "--real", str(tiny_corpus / "real"),
                 "--fake", str(tiny_corpus / "fake")]) == 0
    rows = eval_rows(capsys)
    assert [r["subset"] for r in rows] == ["default", "mAP"]
    assert rows[1]["ap"] == rows[0]["ap"]
    assert (rows[0]["n_real"], rows[0]["n_fake"]) == ("16", "16")


def test_eval_two_subsets(cli_model, tiny_corpus, tmp_path, capsys):
    half = tmp_path / "half"
    for cls in ("real", "fake"):
        (half / cls).mkdir(parents=True)
        for p in sorted((tiny_corpus / cls).glob("*.png"))[:5]:
            shutil.copy(p, half / cls)
    assert main(["eval", "--model", str(cli_model),
                 "--subset", f"a:{tiny_corpus / 'real'}:{tiny_corpus / 'fake'}",
                 "--subset", f"b:{half / 'real'}:{half / 'fake'}"]) == 0
    rows = eval_rows(capsys)
    assert [r["subset"] for r in rows] == ["a", "b", "mAP"]
    assert float(rows[2]["ap"]) == pytest.approx((float(rows[0]["ap"]) + float(rows[1]["ap"])) / 2, abs=1e-6)


def test_eval_empty_subset(cli_model, tiny_corpus, tmp_path):
    (tmp_path / "none").mkdir()
    assert main(["eval", "--model", str(cli_model), "--real", str(tiny_corpus / "real"),
                 "--fake", str(tmp_path / "none")]) == 1


def test_synth(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--n", "3", "--side", "32"]) == 0
    assert len(list((tmp_path / "real").glob("*.png"))) == 3
    assert len(list((tmp_path / "fake").glob("*.png"))) == 3


def test_inspect_published_config(tmp_path, capsys):
    save(published_config_model(2), tmp_path / "published.json")
    assert main(["inspect", "--model", str(tmp_path / "published.json")]) == 0
    total = [line for line in capsys.readouterr().out.splitlines() if line.startswith("Total")][0]
    assert total.split()[1] == "114214"


def test_inspect_missing_file(tmp_path):
    assert main(["inspect", "--model", str(tmp_path / "missing.json")]) == 1
