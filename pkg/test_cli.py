#!/usr/bin/env python3
"""End-to-end command line tests on a tiny corpus: gen-data, train, eval, infer, qcurve, plot"""

import json
import sys
import tempfile
from pathlib import Path

import pandas as pd
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from pixelnav.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from pixelnav.models.encoders import EncoderConfig
from pixelnav.models.networks import PixelNavModel
from pixelnav.utils.database import RunDatabase
from pixelnav.utils.logger import configure_logging

TINY_CONFIG = {
    'seed': 1,
    'threads': 1,
    'logging': {'level': 'WARNING'},
    'encoder': {
        'crop_size': 16, 'crop_extent_px': 64, 'channels': [4, 8, 8], 'model_dim': 16, 'heads': 2,
        'layers': 1, 'freq_pairs': 4, 'coord_dim': 8, 'state_dim': 16, 'hidden_dim': 16,
    },
    'episode': {'batch_size': 4},
    'training': {'epochs': 2, 'max_transitions_per_update': 64},
    'baselines': {'bc_epochs': 2},
    'synth': {'count': 20, 'scenes': 10, 'frame_span_min': 40, 'frame_span_max': 50},
    'evaluation': {'split': 'val', 'qcurve_episodes': 2},
}


def write_config(directory: Path, overrides=None, name: str = "config.yaml") -> Path:
    config = json.loads(json.dumps(TINY_CONFIG))
    for section, values in (overrides or {}).items():
        config.setdefault(section, {}).update(values)
    path = directory / name
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(config, f)
    return path


def cli(*argv) -> int:
    try:
        return main(list(argv))
    finally:
        # later tests log to the default location again
        configure_logging("logs", "INFO")


def run(config: Path, out: Path, *args) -> int:
    return cli(*args, '--config', str(config), '--out-dir', str(out))


def test_usage_errors(tmp_path=None):
    directory = Path(tmp_path or tempfile.mkdtemp())
    config = write_config(directory)
    assert cli('fly') == EXIT_USAGE
    assert run(config, directory, 'train', '--seeds', 'a,b') == EXIT_USAGE
    assert run(directory / "missing.yaml", directory / "out", 'train') == EXIT_USAGE
    assert run(write_config(directory, {"training": {"gamma": 1.5}}, "bad.yaml"), directory / "out", 'train') == EXIT_USAGE
    assert run(config, directory / "out", 'train', '--preset', 'obs9pred9') == EXIT_USAGE
    # no corpus yet
    assert run(config, directory / "out", 'train') == EXIT_USAGE
    assert run(config, directory / "empty", 'plot') == EXIT_USAGE


def test_full_pipeline(tmp_path=None):
    directory = Path(tmp_path or tempfile.mkdtemp())
    config = write_config(directory)
    out = directory / "run"

    assert run(config, out, 'gen-data') == EXIT_OK
    for split in ('train', 'val', 'test'):
        assert (out / 'corpus' / f"{split}.jsonl").exists()
        assert (out / 'corpus' / f"crops_{split}.zip").exists()

    assert run(config, out, 'train') == EXIT_OK
    assert (out / 'checkpoints' / 'model_seed1.npz').exists()
    assert (out / 'checkpoints' / 'bc_seed1.npz').exists()
    assert (out / 'cache' / 'transitions_train.jsonl').exists()
    log = pd.read_csv(out / 'training' / 'train_log_seed1.csv')
    assert list(log['epoch']) == [0, 1] and 'cql_penalty' in log

    model, _, metadata = PixelNavModel.load(out / 'checkpoints' / 'model_seed1.npz')
    assert model.epochs_trained == 2 and metadata['corpus_hash']

    assert run(config, out, 'eval') == EXIT_OK
    with open(out / 'reports' / 'eval_summary.yaml', encoding='utf-8') as f:
        summary = yaml.safe_load(f)
    assert set(summary['across_seeds']) == {'cql', 'bc', 'straightline'}
    assert set(summary['seeds'][1]['wilcoxon']) == {'cql_vs_bc', 'cql_vs_straightline'}
    for method in ('cql', 'bc', 'straightline'):
        frame = pd.read_csv(out / 'reports' / f"{method}_seed1.csv")
        assert len(frame) == summary['episodes'] and (frame['ade'] >= 0).all()

    assert run(config, out, 'infer') == EXIT_OK
    lines = (out / 'predictions' / 'val_seed1.jsonl').read_text(encoding='utf-8').splitlines()
    assert len(lines) == summary['episodes']
    record = json.loads(lines[0])
    assert len(record['predicted']) == len(record['predicted_px']) == len(record['guidance']) == 3
    assert all(0.0 <= v <= 1.0 for point in record['predicted'] for v in point)

    assert run(config, out, 'qcurve') == EXIT_OK
    curves = pd.read_csv(out / 'reports' / 'qcurves_seed1.csv')
    assert curves['episode_id'].nunique() <= 2
    assert run(config, out, 'plot') == EXIT_OK
    assert (out / 'plots' / 'violin_ade.svg').exists() and (out / 'plots' / 'qcurves_seed1.svg').exists()

    with RunDatabase(str(out / 'pixelnav.db')) as db:
        runs = db.get_runs()
        assert {r['command'] for r in runs} == {'gen-data', 'train', 'eval', 'infer', 'qcurve', 'plot'}
        assert all(r['status'] == 'COMPLETED' for r in runs)
        train_run = db.get_runs('train')[0]
        assert len(db.get_epochs(train_run['run_id'])) == 2
    assert len(list((out / 'manifests').glob('*.json'))) == 6

    # an untrained checkpoint is a runtime failure
    untrained = PixelNavModel(EncoderConfig.from_section(TINY_CONFIG['encoder'])).save(directory / "untrained.npz")
    assert run(config, out, 'eval', '--checkpoint', str(untrained)) == EXIT_RUNTIME
    garbage = directory / "garbage.npz"
    garbage.write_text("not a checkpoint", encoding='utf-8')
    assert run(config, out, 'infer', '--checkpoint', str(garbage)) == EXIT_RUNTIME
    with RunDatabase(str(out / 'pixelnav.db')) as db:
        assert db.get_runs('infer')[0]['status'] == 'FAILED'


def test_train_eval_is_reproducible(tmp_path=None):
    directory = Path(tmp_path or tempfile.mkdtemp())
    config = write_config(directory)
    first, second = directory / "first", directory / "second"
    assert run(config, first, 'gen-data') == EXIT_OK
    corpus = str(first / 'corpus')
    for out in (first, second):
        assert run(config, out, 'train', '--corpus', corpus) == EXIT_OK
        assert run(config, out, 'eval', '--corpus', corpus) == EXIT_OK

    reports = sorted(p.name for p in (first / 'reports').iterdir())
    assert 'eval_summary.yaml' in reports and 'cql_seed1.csv' in reports
    assert reports == sorted(p.name for p in (second / 'reports').iterdir())
    for name in reports:
        assert (first / 'reports' / name).read_bytes() == (second / 'reports' / name).read_bytes(), name

    # loss columns match too; wall time does not
    logs = [pd.read_csv(out / 'training' / 'train_log_seed1.csv').drop(columns=['wall_time']) for out in (first, second)]
    assert logs[0].equals(logs[1])


if __name__ == "__main__":
    from test_platform import run_module
    sys.exit(run_module(sys.modules[__name__]))
