"""CLI surface: exit codes, artifacts, end-to-end pipeline."""
from __future__ import annotations

import csv

import numpy as np
import pytest

from pal.cli import main
from pal.data import load_dataset

TRAIN_TINY = [
    "--set", "train.epochs=2",
    "--set", "train.lr_decay_epoch=2",
    "--set", "train.warmup_epochs=1",
    "--set", "train.batch_size=16",
]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = main(["gen-data", "--spec", "default", "--out", str(out), "--items", "24"])
    assert code == 0
    return out


def test_gen_data_writes_files(data_dir, capsys):
    base = load_dataset(data_dir / "base.pald")
    novel = load_dataset(data_dir / "novel.pald")
    assert len(base.y) == 20 * 24
    assert len(novel.y) == 8 * 24
    assert set(base.classes).isdisjoint(novel.classes)


def test_gen_data_unknown_spec_is_runtime_error(tmp_path, capsys):
    code = main(["gen-data", "--spec", "mystery", "--out", str(tmp_path)])
    assert code == 1
    assert "unknown spec" in capsys.readouterr().err


def test_usage_error_exit_code_2():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["train-variant"])  # missing required --variant
    assert exc.value.code == 2


def test_missing_file_is_diagnostic_not_traceback(capsys):
    code = main(["eval-episodes", "--checkpoint", "missing.palw", "--data", "missing.pald"])
    assert code == 1
    assert "pal: error:" in capsys.readouterr().err


def test_full_pipeline_and_eval(data_dir, tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["train-partner", "--base", str(data_dir / "base.pald"),
                 "--out", str(run), *TRAIN_TINY]) == 0
    assert (run / "partner_encoder.palw").exists()
    assert (run / "metrics_partner.csv").exists()

    assert main(["train-main", "--base", str(data_dir / "base.pald"),
                 "--partner", str(run / "partner_encoder.palw"),
                 "--out", str(run), *TRAIN_TINY]) == 0
    assert (run / "main_encoder.palw").exists()
    assert (run / "main_classifier.palw").exists()

    csv_path = tmp_path / "eval.csv"
    assert main(["eval-episodes", "--checkpoint", str(run / "main_encoder.palw"),
                 "--data", str(data_dir / "novel.pald"),
                 "--n", "5", "--k", "1", "--episodes", "20",
                 "--csv", str(csv_path)]) == 0
    out = capsys.readouterr().out
    summary = [line for line in out.splitlines() if "±" in line]
    assert summary, out
    mean = float(summary[0].split("±")[0])
    assert 0.0 <= mean <= 1.0
    assert csv_path.exists()


def test_metrics_csv_schema(data_dir, tmp_path):
    run = tmp_path / "run"
    main(["train-variant", "--variant", "CE_only",
          "--base", str(data_dir / "base.pald"), "--out", str(run), *TRAIN_TINY])
    with open(run / "metrics_main.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    first = rows[0]
    for col in ("epoch", "step", "lr", "loss_total", "loss_ce", "loss_feat",
                "loss_logit", "w_logit", "skipped_positive_instances"):
        assert col in first


def test_dump_embeddings_unit_rows(data_dir, tmp_path):
    run = tmp_path / "run"
    main(["train-variant", "--variant", "CE_only",
          "--base", str(data_dir / "base.pald"), "--out", str(run), *TRAIN_TINY])
    out_csv = tmp_path / "emb.csv"
    assert main(["dump-embeddings", "--checkpoint", str(run / "main_encoder.palw"),
                 "--data", str(data_dir / "novel.pald"), "--out", str(out_csv)]) == 0
    with open(out_csv) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    assert header[:2] == ["index", "label"]
    mat = np.array([[float(v) for v in row[2:]] for row in body])
    np.testing.assert_allclose(np.linalg.norm(mat, axis=1), 1.0, atol=1e-6)


def test_ablate_table4_rows(data_dir, tmp_path, capsys):
    out = tmp_path / "grid"
    assert main(["ablate", "--table", "4",
                 "--base", str(data_dir / "base.pald"),
                 "--data", str(data_dir / "novel.pald"),
                 "--out", str(out), "--episodes", "10", *TRAIN_TINY]) == 0
    with open(out / "table4.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["variant"] for r in rows] == ["CE_only", "Partner_CT", "Partner_CE", "PAL"]
    for row in rows:
        assert np.isfinite(float(row["acc_1shot"]))
        assert np.isfinite(float(row["acc_5shot"]))


def test_encoder_config_reaches_training(data_dir, tmp_path):
    run = tmp_path / "run"
    assert main(["train-variant", "--variant", "CE_only",
                 "--base", str(data_dir / "base.pald"), "--out", str(run),
                 "--set", "encoder.embed_dim=16",
                 "--set", "encoder.hidden_dims=24,24", *TRAIN_TINY]) == 0
    out_csv = tmp_path / "emb.csv"
    assert main(["dump-embeddings", "--checkpoint", str(run / "main_encoder.palw"),
                 "--data", str(data_dir / "novel.pald"), "--out", str(out_csv)]) == 0
    header = out_csv.read_text().splitlines()[0].split(",")
    assert len(header) == 2 + 16
    code = main(["train-variant", "--variant", "CE_only",
                 "--base", str(data_dir / "base.pald"), "--out", str(run),
                 "--set", "encoder.input_dim=99", *TRAIN_TINY])
    assert code == 1  # declared input_dim contradicts the data


def test_ablate_table3_scheme_list(data_dir, tmp_path):
    out = tmp_path / "grid3"
    assert main(["ablate", "--table", "3", "--seed", "7",
                 "--base", str(data_dir / "base.pald"),
                 "--data", str(data_dir / "novel.pald"),
                 "--out", str(out), "--episodes", "10", *TRAIN_TINY]) == 0
    with open(out / "table3.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["variant"] for r in rows] == [
        "CE_only", "SupCT_only", "MultiTask", "Mutual", "Reverse", "PAL",
    ]


def test_ablate_parallel_jobs_match_sequential(data_dir, tmp_path):
    args = [
        "ablate", "--table", "4",
        "--base", str(data_dir / "base.pald"),
        "--data", str(data_dir / "novel.pald"),
        "--episodes", "10", *TRAIN_TINY,
    ]
    seq, par = tmp_path / "seq", tmp_path / "par"
    assert main([*args, "--out", str(seq), "--jobs", "1"]) == 0
    assert main([*args, "--out", str(par), "--jobs", "2"]) == 0
    assert (seq / "table4.csv").read_text() == (par / "table4.csv").read_text()


def test_init_config_template(tmp_path):
    path = tmp_path / "run.cfg"
    assert main(["init-config", str(path)]) == 0
    text = path.read_text()
    assert "[train]" in text and "variant = PAL" in text
