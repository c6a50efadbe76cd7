import json
from pathlib import Path

import pytest

from advspk.cli import main


def test_synth_corpus_command(tmp_path, capsys):
    out = tmp_path / "corpus"
    rc = main(["synth-corpus", "--out", str(out), "--speakers", "3",
               "--utts-per-speaker", "3", "--duration", "1.0",
               "--channel-coloration", "--seed", "4", "--noise", "--rirs",
               "--trials", "8", "--eval-utts", "2"])
    assert rc == 0
    assert (out / "train_manifest.txt").exists()
    assert (out / "noise_manifest.txt").exists()
    assert (out / "rir_manifest.txt").exists()
    assert len((out / "trials.txt").read_text().splitlines()) == 8


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    rc = main(["synth-corpus", "--out", str(corpus), "--speakers", "3",
               "--utts-per-speaker", "3", "--duration", "1.6", "--seed", "1",
               "--trials", "8", "--eval-utts", "2"])
    assert rc == 0
    config = root / "config.yaml"
    config.write_text(f"""
corpus:
  audio_root: {corpus}
  train_manifest: {corpus / 'train_manifest.txt'}
  trial_list: {corpus / 'trials.txt'}
batch:
  batch_size: 3
  segment_duration_s: 0.4
  regime: none
loss:
  speaker_loss: angular_prototypical
encoder:
  embed_dim: 16
  channel_widths: [2, 4, 4, 8]
  blocks_per_stage: [1, 1, 1, 1]
  attention_hidden: 4
schedule:
  epochs: 1
eval:
  eval_segment_s: 1.0
repeats: 1
seed: 2
""")
    return root, corpus, config


def test_train_evaluate_report_cycle(cli_workspace, capsys):
    root, corpus, config = cli_workspace
    run_dir = root / "run"
    assert main(["train", "--config", str(config), "--out", str(run_dir)]) == 0
    printed = capsys.readouterr().out
    assert "EER" in printed and "minDCF" in printed
    results = json.loads((run_dir / "results.json").read_text())
    assert 0.0 <= results["eer"] <= 1.0

    checkpoints = sorted(run_dir.glob("checkpoint_epoch*.pt"))
    assert checkpoints
    eval_dir = root / "eval"
    assert main(["evaluate", "--checkpoint", str(checkpoints[-1]),
                 "--trials", str(corpus / "trials.txt"),
                 "--audio-root", str(corpus), "--out", str(eval_dir)]) == 0
    assert (eval_dir / "scores.txt").exists()


def test_sweep_and_report(cli_workspace, capsys):
    root, corpus, config = cli_workspace
    out = root / "sweep"
    assert main(["sweep", "--config", str(config), "--out", str(out)]) == 0
    assert (out / "report.txt").exists()
    assert (out / "report.csv").exists()
    capsys.readouterr()
    assert main(["report", "--runs", str(out)]) == 0
    assert "EER" in capsys.readouterr().out


def test_report_on_empty_directory(tmp_path, capsys):
    assert main(["report", "--runs", str(tmp_path)]) == 2
