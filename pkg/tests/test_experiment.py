import csv
import io
import json

import pytest
import yaml

from advspk.audio.io import read_train_manifest
from advspk.errors import AdvspkError
from advspk.experiment import (Condition, ExperimentConfig, ResultRow,
                               conditions_from_config, dump_config,
                               load_config, render_csv, render_report,
                               run_experiment, run_seed)
from advspk.synth import (make_noise_corpus, make_rir_set,
                          make_synthetic_corpus, make_trial_list)


def _write_config(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return path


def test_config_roundtrip(tmp_path):
    path = _write_config(tmp_path, """
corpus:
  audio_root: /data
  train_manifest: /data/train.txt
  trial_list: /data/trials.txt
batch:
  batch_size: 16
  regime: noise_and_rir
loss:
  speaker_loss: angular_prototypical
  lambda: 3.0
  aat_enabled: true
schedule:
  epochs: 4
repeats: 2
seed: 5
""")
    cfg = load_config(path)
    assert cfg.batch.batch_size == 16
    assert cfg.loss.lambda_ == 3.0
    assert cfg.repeats == 2
    dump_config(cfg, tmp_path / "resolved.yaml")
    resolved = yaml.safe_load((tmp_path / "resolved.yaml").read_text())
    assert resolved["loss"]["lambda"] == 3.0
    assert resolved["batch"]["regime"] == "noise_and_rir"
    reloaded = load_config(tmp_path / "resolved.yaml")
    assert reloaded.batch.batch_size == 16


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(AdvspkError):
        load_config(_write_config(tmp_path, "batch:\n  batch_sise: 3\n"))
    with pytest.raises(AdvspkError):
        load_config(_write_config(tmp_path, "mystery:\n  a: 1\n"))


def test_lambda_sweep_mirrors_the_ablation_grid(tmp_path):
    path = _write_config(tmp_path, """
loss:
  speaker_loss: angular_prototypical
  aat_enabled: true
batch:
  regime: noise_and_rir
sweep:
  lambdas: [0, 1, 3, 10]
""")
    conditions = conditions_from_config(load_config(path))
    assert [c.lambda_ for c in conditions] == [0.0, 1.0, 3.0, 10.0]
    assert [c.aat_enabled for c in conditions] == [False, True, True, True]


def test_seed_counter_scheme():
    cfg = ExperimentConfig(seed=100)
    assert run_seed(cfg, 0, 0) == 100
    assert run_seed(cfg, 0, 2) == 102
    assert run_seed(cfg, 3, 1) == 3101


def _rows():
    cond = Condition("angular_prototypical", "noise_and_rir", True, 3.0, True)
    solo = Condition("prototypical", "none", True, 0.0, False)
    return [
        ResultRow(cond, eer_mean=0.0865, eer_std=0.0014,
                  mindcf_mean=0.454, mindcf_std=0.013, n_runs=3,
                  run_ids=["abc"]),
        ResultRow(solo, eer_mean=0.273, eer_std=None,
                  mindcf_mean=0.788, mindcf_std=None, n_runs=1,
                  run_ids=["def"]),
    ]


def test_report_formatting_and_missing_std():
    report = render_report(_rows())
    assert "8.65±0.14" in report      # EER rendered as percent, 2 decimals
    assert "0.454±0.013" in report    # minDCF to 3 decimals
    assert "27.30±—" in report        # single-run rows carry no std


def test_csv_roundtrips_losslessly():
    text = render_csv(_rows())
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0][0] == "speaker_loss"
    assert len(rows) == 3
    parsed = float(rows[1][4])
    assert parsed == 0.0865
    assert rows[2][5] == ""  # empty std survives the round trip


@pytest.fixture(scope="module")
def micro_experiment(tmp_path_factory):
    root = tmp_path_factory.mktemp("exp")
    manifest = make_synthetic_corpus(root, n_speakers=4, utts_per_speaker=3,
                                     channel_coloration=True, seed=0,
                                     utt_duration_s=2.0)
    make_noise_corpus(root, seed=1, clips_per_category=2, clip_duration_s=0.5)
    make_rir_set(root, seed=2, n_filters=3)
    entries = read_train_manifest(manifest)
    make_trial_list([e for e in entries if "utt002" in e[0] or "utt001" in e[0]],
                    root / "trials.txt", n_trials=12, seed=3)
    config = f"""
corpus:
  audio_root: {root}
  train_manifest: {manifest}
  noise_manifest: {root / 'noise_manifest.txt'}
  rir_manifest: {root / 'rir_manifest.txt'}
  trial_list: {root / 'trials.txt'}
batch:
  batch_size: 3
  segment_duration_s: 0.4
  regime: noise_or_rir
loss:
  speaker_loss: angular_prototypical
  lambda: 1.0
  aat_enabled: true
encoder:
  embed_dim: 16
  channel_widths: [2, 4, 4, 8]
  blocks_per_stage: [1, 1, 1, 1]
  attention_hidden: 4
schedule:
  epochs: 2
eval:
  eval_segment_s: 1.0
repeats: 1
seed: 9
"""
    path = root / "config.yaml"
    path.write_text(config)
    return root, path


def test_run_experiment_end_to_end_with_caching(micro_experiment, tmp_path):
    root, config_path = micro_experiment
    cfg = load_config(config_path)
    out = tmp_path / "out"
    logs = []
    rows, failures = run_experiment(cfg, out, log_fn=logs.append)
    assert not failures
    assert len(rows) == 1
    assert rows[0].n_runs == 1
    assert rows[0].eer_std is None
    run_id = rows[0].run_ids[0]
    results = json.loads((out / "runs" / run_id / "results.json").read_text())
    assert results["config_hash"] == run_id          # provenance link
    assert results["seed"] == run_seed(cfg, 0, 0)
    assert (out / "runs" / run_id / "scores.txt").exists()
    assert (out / "config.yaml").exists()

    # identical re-run is a cache hit: no retraining
    logs.clear()
    rows2, _ = run_experiment(cfg, out, log_fn=logs.append)
    assert any("[cache]" in line for line in logs)
    assert rows2[0].eer_mean == rows[0].eer_mean


def test_failed_runs_are_isolated(micro_experiment, tmp_path):
    root, config_path = micro_experiment
    cfg = load_config(config_path)
    cfg.corpus.trial_list = str(root / "missing_trials.txt")
    rows, failures = run_experiment(cfg, tmp_path / "out2",
                                    log_fn=lambda *_: None)
    assert failures and not rows
