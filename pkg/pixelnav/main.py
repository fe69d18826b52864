"""Main entry point for the PixelNav command line"""

import argparse
import hashlib
import json
import platform
import sys
import uuid
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy
import yaml
from dotenv import load_dotenv

from pixelnav import __version__
from pixelnav.agents import AgentManager, BCAgent, CQLAgent, GuidanceConfig, StraightLineAgent
from pixelnav.analysis import (
    compare_methods,
    compute_qcurves,
    dominance_fraction,
    evaluate_rollouts,
    to_pixels,
    write_qcurves,
)
from pixelnav.analysis.plots import render_reports
from pixelnav.core.exceptions import ConfigError, InvalidConfig, PixelNavError, UntrainedModel
from pixelnav.data import DatasetConfig, SynthConfig, build_episodes, generate_corpus, load_split, save_transitions
from pixelnav.models import EncoderConfig, PixelNavModel
from pixelnav.training import CQLTrainer, TrainConfig
from pixelnav.utils import ConfigManager, RunDatabase, get_logger
from pixelnav.utils.config_manager import MODEL_SECTIONS, default_out_dir
from pixelnav.utils.logger import configure_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

COMMANDS = ('gen-data', 'train', 'eval', 'infer', 'qcurve', 'plot')


class UsageError(PixelNavError):
    """Command line could not be parsed"""


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors map to exit code 1"""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="pixelnav", description="Goal-conditioned offline CQL for pixel-space trajectories")
    parser.add_argument('--version', action='version', version=f"pixelnav {__version__}")
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', help="YAML config file (defaults to ./config.yaml when present)")
    parser.add_argument('--seed', type=int, help="root seed")
    parser.add_argument('--seeds', nargs='?', const='', help="comma-separated seeds for multi-seed train/eval; "
                        "bare --seeds uses evaluation.seeds from the config")
    parser.add_argument('--preset', help="experiment preset: obs6pred3 or obs3pred6")
    parser.add_argument('--out-dir', help="output directory (env PIXELNAV_OUT_DIR)")
    parser.add_argument('--corpus', help="corpus directory (defaults to <out-dir>/corpus)")
    parser.add_argument('--checkpoint', help="model checkpoint (defaults to <out-dir>/checkpoints/model_seed<seed>.npz)")
    parser.add_argument('--epochs', type=int, help="training epochs")
    parser.add_argument('--threads', type=int, help="worker threads")
    parser.add_argument('--split', choices=('train', 'val', 'test'), help="split for eval/infer/qcurve")
    return parser


def _parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(',') if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise UsageError("--seeds is empty")
    return seeds


def _hash_files(paths: Sequence[Path]) -> Optional[str]:
    existing = [p for p in paths if p.exists()]
    if not existing:
        return None
    digest = hashlib.sha256()
    for path in sorted(existing):
        digest.update(path.name.encode('utf-8'))
        with open(path, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 20), b''):
                digest.update(chunk)
    return digest.hexdigest()


class PixelNavPlatform:
    """Wires configuration, data, training, evaluation and reporting for one CLI command"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = ConfigManager(args.config)
        if args.preset:
            self.config.apply_preset(args.preset)
        if args.seed is not None:
            self.config.set('seed', args.seed)
        if args.epochs is not None:
            self.config.set('training.epochs', args.epochs)
        if args.threads is not None:
            self.config.set('threads', args.threads)
        if args.split is not None:
            self.config.set('evaluation.split', args.split)

        is_valid, errors = self.config.validate_config()
        if not is_valid:
            raise InvalidConfig("Configuration validation failed:\n  - " + "\n  - ".join(errors))

        self.seed: int = self.config.get('seed')
        if args.seeds is None:
            self.seeds: List[int] = [self.seed]
        elif args.seeds == '':
            self.seeds = list(self.config.get('evaluation.seeds'))
        else:
            self.seeds = _parse_seeds(args.seeds)
        self.threads: int = self.config.get('threads')
        self.out_dir = Path(args.out_dir or default_out_dir(self.config.get('paths.out_dir')))
        self.corpus_dir = Path(args.corpus or self.config.get('paths.corpus_dir') or self.out_dir / 'corpus')
        self.reports_dir = self.out_dir / 'reports'
        self.checkpoint_dir = self.out_dir / 'checkpoints'

        configure_logging(str(self.out_dir / self.config.get('logging.log_dir', 'logs')),
                          self.config.get('logging.level', 'INFO'))
        self.logger = get_logger("PixelNav")
        for warning in self.config.warnings:
            self.logger.warning(warning)

        db_path = Path(self.config.get('database.path'))
        self.database = RunDatabase(str(db_path if db_path.is_absolute() else self.out_dir / db_path))
        self.run_id = f"{args.command}_{datetime.now():%Y%m%d_%H%M%S}_{uuid.uuid4().hex[:6]}"

        self.model_hash = self.config.config_hash(MODEL_SECTIONS)
        self.guidance = GuidanceConfig.from_config(self.config)

    # Run bookkeeping

    def corpus_hash(self) -> Optional[str]:
        return _hash_files(list(self.corpus_dir.glob('*.jsonl')) + list(self.corpus_dir.glob('crops_*.zip')))

    def write_manifest(self) -> Path:
        """Config snapshot, seeds, versions and corpus hash, enough to reproduce the run"""
        manifest = {
            'run_id': self.run_id,
            'command': self.args.command,
            'argv': sys.argv[1:],
            'seed': self.seed,
            'seeds': self.seeds,
            'config': self.config.config,
            'config_hash': self.config.config_hash(),
            'model_config_hash': self.model_hash,
            'corpus_dir': str(self.corpus_dir),
            'corpus_hash': self.corpus_hash(),
            'versions': {
                'pixelnav': __version__,
                'python': platform.python_version(),
                'numpy': np.__version__,
                'scipy': scipy.__version__,
                'pandas': pd.__version__,
            },
            'started_at': datetime.now().isoformat(),
        }
        path = self.out_dir / 'manifests' / f"{self.run_id}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(manifest, f, indent=2, default=str)
        self.database.insert_run({
            'run_id': self.run_id,
            'command': self.args.command,
            'seed': self.seed,
            'config_hash': manifest['config_hash'],
            'corpus_hash': manifest['corpus_hash'],
            'out_dir': str(self.out_dir),
            'manifest': manifest,
        })
        return path

    def run(self) -> int:
        handlers = {
            'gen-data': self.gen_data,
            'train': self.train,
            'eval': self.evaluate,
            'infer': self.infer,
            'qcurve': self.qcurve,
            'plot': self.plot,
        }
        self.logger.info(f"pixelnav {__version__}: {self.args.command} (run {self.run_id}, out {self.out_dir})")
        self.write_manifest()
        try:
            handlers[self.args.command]()
        except BaseException:
            self.database.finish_run(self.run_id, 'FAILED')
            raise
        self.database.finish_run(self.run_id, 'COMPLETED')
        return EXIT_OK

    def close(self) -> None:
        self.database.close()

    # Shared loading

    def checkpoint_path(self, seed: int) -> Path:
        if self.args.checkpoint:
            if len(self.seeds) > 1:
                raise UsageError("--checkpoint names one model; drop it or pass a single seed")
            return Path(self.args.checkpoint)
        return self.checkpoint_dir / f"model_seed{seed}.npz"

    def bc_path(self, seed: int) -> Path:
        model_path = self.checkpoint_path(seed)
        return model_path.with_name(model_path.name.replace('model', 'bc', 1)) \
            if model_path.name.startswith('model') else model_path.with_name(f"bc_{model_path.name}")

    def load_episodes(self, split: str):
        trajectories, tiles = load_split(self.corpus_dir, split)
        episodes = build_episodes(trajectories, tiles, DatasetConfig.from_config(self.config), self.threads)
        self.logger.info(f"{split}: {len(trajectories)} trajectories, {len(episodes)} episodes")
        return episodes

    def load_model(self, seed: int) -> PixelNavModel:
        path = self.checkpoint_path(seed)
        model, _, metadata = PixelNavModel.load(path)
        if metadata.get('config_hash') != self.model_hash:
            self.logger.warning(f"Checkpoint {path} was trained with a different configuration "
                                f"({str(metadata.get('config_hash'))[:12]} vs {self.model_hash[:12]})")
        return model

    # Commands

    def gen_data(self) -> None:
        cfg = SynthConfig.from_config(self.config)
        written = generate_corpus(cfg, self.corpus_dir, threads=self.threads)
        files = ', '.join(paths['corpus'].name for paths in written.values())
        self.logger.info(f"Corpus written to {self.corpus_dir} ({files})")

    def train(self) -> None:
        episodes = self.load_episodes('train')
        save_transitions(self.out_dir / 'cache' / 'transitions_train.jsonl',
                         (t for e in episodes for t in e.transitions))
        encoder_cfg = EncoderConfig.from_section(self.config.section('encoder'))
        train_cfg = TrainConfig.from_config(self.config)
        boundaries = tuple(self.config.get('episode.bucket_boundaries'))
        metadata = {'config_hash': self.model_hash, 'corpus_hash': self.corpus_hash()}

        for seed in self.seeds:
            model = PixelNavModel(encoder_cfg, self.config.get('actions.delta_max'), seed)
            trainer = CQLTrainer(model, train_cfg, seed)

            def record(log) -> None:
                self.database.insert_epoch(self.run_id, {**log.as_row(), 'learning_rates': log.learning_rates})

            logs = trainer.fit(episodes, boundaries=boundaries, on_epoch=record)
            path = trainer.save(self.checkpoint_path(seed), {**metadata, 'epoch': len(logs)})
            self.logger.info(f"seed {seed}: checkpoint written to {path}")
            log_path = self.out_dir / 'training' / f"train_log_seed{seed}.csv"
            log_path.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame([log.as_row() for log in logs]).to_csv(log_path, index=False, float_format='%.10g')

            if self.config.get('baselines.train_bc', True):
                bc = BCAgent(encoder_cfg, seed)
                bc.train(episodes, epochs=self.config.get('baselines.bc_epochs'), lr=self.config.get('baselines.bc_lr'),
                         batch_size=train_cfg.batch_size, boundaries=boundaries, floor_ratio=train_cfg.lr_floor_ratio)
                bc.save(self.bc_path(seed), metadata)
                self.logger.info(f"seed {seed}: BC baseline written to {self.bc_path(seed)}")

    def evaluate(self) -> None:
        split = self.config.get('evaluation.split')
        episodes = self.load_episodes(split)
        observations = [e.observation() for e in episodes]
        summary: Dict[str, Any] = {'split': split, 'episodes': len(episodes), 'seeds': {}, 'across_seeds': {}}
        means: Dict[str, Dict[str, List[float]]] = {}

        for seed in self.seeds:
            manager = AgentManager(self.threads)
            manager.register_agent(CQLAgent(self.load_model(seed), self.guidance))
            bc_path = self.bc_path(seed)
            if bc_path.exists():
                manager.register_agent(BCAgent.load(bc_path))
            else:
                self.logger.warning(f"No BC baseline at {bc_path}; evaluating without it")
            manager.register_agent(StraightLineAgent(self.guidance))

            ready = manager.initialize_all()
            if not ready.get('cql', False):
                raise UntrainedModel(f"Checkpoint {self.checkpoint_path(seed)} holds an untrained model")

            results = manager.predict_all(observations)
            if manager.errors:
                raise RuntimeError(f"Prediction failed: {manager.errors}")

            per_seed: Dict[str, Any] = {}
            values: Dict[str, Dict[str, np.ndarray]] = {}
            for method, rollouts in results.items():
                report = evaluate_rollouts(method, episodes, rollouts, threads=self.threads, seed=seed)
                report.write(self.reports_dir, f"{method}_seed{seed}")
                self.database.insert_metrics(self.run_id, method, report.flat_summary(), seed)
                per_seed[method] = report.summary()
                values[method] = {m: report.values(m) for m in ('ade', 'fde', 'fd')}
                for metric in ('ade', 'fde', 'fd'):
                    means.setdefault(method, {}).setdefault(metric, []).append(per_seed[method][metric]['mean'])

            per_seed['wilcoxon'] = {
                f"cql_vs_{other}": compare_methods(values['cql'], values[other])
                for other in values if other != 'cql'
            }
            summary['seeds'][seed] = per_seed

        for method, metrics in means.items():
            summary['across_seeds'][method] = {
                metric: {'mean': float(np.mean(v)), 'std': float(np.std(v)), 'seeds': len(v)}
                for metric, v in metrics.items()
            }
        path = self.reports_dir / 'eval_summary.yaml'
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(summary, f, default_flow_style=False, sort_keys=False)
        for method, stats in summary['across_seeds'].items():
            self.logger.info(f"{method}: ADE {stats['ade']['mean']:.2f} ± {stats['ade']['std']:.2f} px "
                             f"over {stats['ade']['seeds']} seed(s)")
        self.logger.info(f"Evaluation summary written to {path}")

    def infer(self) -> None:
        split = self.config.get('evaluation.split')
        episodes = self.load_episodes(split)
        for seed in self.seeds:
            agent = CQLAgent(self.load_model(seed), self.guidance)
            if not agent.initialize():
                raise UntrainedModel(f"Checkpoint {self.checkpoint_path(seed)} holds an untrained model")
            path = self.out_dir / 'predictions' / f"{split}_seed{seed}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as f:
                for episode in episodes:
                    rollout = agent.predict(episode.observation())
                    record = {
                        'id': episode.episode_id,
                        'trajectory_id': episode.spec.trajectory_id,
                        'source_resolution': list(episode.resolution),
                        'observed': episode.observed.round(8).tolist(),
                        'observed_px': to_pixels(episode.observed, episode.resolution).round(3).tolist(),
                        'predicted': rollout.points.round(8).tolist(),
                        'predicted_px': to_pixels(rollout.points, episode.resolution).round(3).tolist(),
                        'guidance': rollout.guidance.round(8).tolist(),
                    }
                    f.write(json.dumps(record) + "\n")
            self.logger.info(f"seed {seed}: {len(episodes)} rollouts written to {path}")

    def qcurve(self) -> None:
        split = self.config.get('evaluation.split')
        episodes = self.load_episodes(split)[:self.config.get('evaluation.qcurve_episodes')]
        tolerance = self.config.get('evaluation.dominance_tolerance')
        for seed in self.seeds:
            curves = compute_qcurves(self.load_model(seed), episodes)
            path = write_qcurves(curves, self.reports_dir / f"qcurves_seed{seed}.csv")
            fraction = dominance_fraction(curves, tolerance)
            with open(self.reports_dir / f"qcurves_seed{seed}_summary.yaml", 'w', encoding='utf-8') as f:
                yaml.safe_dump({'seed': seed, 'episodes': len(curves), 'dominance_fraction': fraction,
                                'tolerance': tolerance}, f, sort_keys=False)
            self.logger.info(f"seed {seed}: Q-curves written to {path} (dominance {fraction:.1%})")

    def plot(self) -> None:
        if not self.reports_dir.exists():
            raise FileNotFoundError(f"No reports directory at {self.reports_dir}; run eval or qcurve first")
        render_reports(self.reports_dir, self.out_dir / 'plots')


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    load_dotenv()
    platform_ = None
    try:
        args = build_parser().parse_args(argv)
        platform_ = PixelNavPlatform(args)
        code = platform_.run()
    except (UsageError, ConfigError, InvalidConfig, FileNotFoundError) as e:
        get_logger("PixelNav").error(str(e))
        code = EXIT_USAGE
    except KeyboardInterrupt:
        get_logger("PixelNav").warning("Interrupted")
        code = EXIT_RUNTIME
    except Exception as e:
        get_logger("PixelNav").exception(f"Fatal error: {e}")
        code = EXIT_RUNTIME
    finally:
        if platform_ is not None:
            platform_.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
