#!/usr/bin/env python3
"""
Test runner for the PixelNav platform
Runs every test_*.py module next to this file; each test also runs under pytest
"""

import importlib
import inspect
import os
import sys
import tempfile
import time
import traceback
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent))


def test_imports():
    """Test that all modules can be imported"""
    from pixelnav import __version__, __author__
    assert __version__ and __author__

    from pixelnav.utils import get_config, get_logger, RunDatabase, CropArchive
    from pixelnav.core import Trajectory, densify, quantize_displacement, step_reward
    from pixelnav.engine import Tensor, Adam
    from pixelnav.models import PixelNavModel
    from pixelnav.data import build_episodes, generate_corpus
    from pixelnav.training import CQLTrainer
    from pixelnav.agents import AgentManager, CQLAgent, BCAgent, StraightLineAgent
    from pixelnav.analysis import ade, fde, frechet, wilcoxon_signed_rank
    from pixelnav.main import PixelNavPlatform, main
    assert callable(main)


def test_config():
    """Test configuration management"""
    from pixelnav.utils import ConfigManager

    config = ConfigManager(str(Path(__file__).parent / 'config.example.yaml'))
    assert config.get('actions.delta_max') == 0.05
    assert config.get('reward.tau_dist') == 0.02
    assert config.get('no.such.key', 'fallback') == 'fallback'

    is_valid, errors = config.validate_config()
    assert is_valid, errors

    config.apply_preset('obs3pred6')
    assert config.get('episode.t_obs') == 3 and config.get('episode.t_pred') == 6
    config.apply_preset('obs6pred3')
    assert config.get('episode.t_obs') == 6 and config.get('episode.t_pred') == 3

    before = config.config_hash()
    config.set('training.gamma', 1.5)
    assert config.config_hash() != before
    is_valid, errors = config.validate_config()
    assert not is_valid and any('gamma' in e for e in errors)


def test_config_errors():
    """YAML syntax errors carry a line number; unknown presets are rejected"""
    from pixelnav.core.exceptions import ConfigError
    from pixelnav.utils import ConfigManager

    with tempfile.TemporaryDirectory() as directory:
        path = Path(directory) / 'bad.yaml'
        path.write_text("seed: 42\ntraining:\n  epochs: [1, 2\n  gamma: 0.9\n", encoding='utf-8')
        try:
            ConfigManager(str(path))
            assert False, "expected ConfigError"
        except ConfigError as e:
            assert e.line is not None and e.line >= 3

        try:
            ConfigManager(str(Path(directory) / 'missing.yaml'))
            assert False, "expected FileNotFoundError"
        except FileNotFoundError:
            pass

    config = ConfigManager(str(Path(__file__).parent / 'config.example.yaml'))
    try:
        config.apply_preset('obs1pred1')
        assert False, "expected ConfigError"
    except ConfigError:
        pass


def test_logging(tmp_path=None):
    """Test that existing loggers follow the configured log directory"""
    from pixelnav.utils.logger import configure_logging, get_logger

    directory = Path(tmp_path or tempfile.mkdtemp())
    logger = get_logger("test.logdir")
    assert get_logger("test.logdir") is logger
    try:
        configure_logging(str(directory / "logs"), "WARNING")
        logger.debug("written to the file only")
        files = list((directory / "logs").glob("pixelnav_*.log"))
        assert len(files) == 1
        assert "written to the file only" in files[0].read_text(encoding='utf-8')
    finally:
        configure_logging("logs", "INFO")
    assert logger.log_dir == Path("logs")


def test_database():
    """Test the run ledger"""
    from pixelnav.utils import RunDatabase

    with tempfile.TemporaryDirectory() as directory:
        db = RunDatabase(os.path.join(directory, 'ledger.db'))
        db.insert_run({
            'run_id': 'train_test',
            'command': 'train',
            'seed': 42,
            'config_hash': 'abc',
            'out_dir': directory,
            'manifest': {'seed': 42},
        })
        db.insert_epoch('train_test', {'epoch': 0, 'critic1': 1.0, 'critic2': 1.5, 'cql_penalty': 0.02,
                                       'policy': -0.3, 'bc': 2.1, 'magnitude': 0.001,
                                       'learning_rates': {'actor': 3e-4}, 'wall_time': 0.5})
        db.insert_metrics('train_test', 'cql', {'ade_mean': 10.0, 'ade_std': 1.0, 'trajectories': 4}, seed=42)
        db.finish_run('train_test', 'COMPLETED')

        runs = db.get_runs(command='train')
        assert len(runs) == 1 and runs[0]['status'] == 'COMPLETED'
        assert db.get_epochs('train_test')[0]['critic2'] == 1.5
        assert db.get_metrics('train_test')[0]['ade_mean'] == 10.0
        db.close()


def test_agents():
    """Test agent registration and evaluation through the manager"""
    import numpy as np
    from pixelnav.agents import AgentManager, BaseAgent, Rollout
    from pixelnav.data import Observation

    class FixedAgent(BaseAgent):
        def initialize(self):
            self.update_status("ready")
            return True

        def predict(self, observation):
            return Rollout(observation.episode_id, np.tile(observation.last_position, (observation.horizon, 1)))

    class BrokenAgent(FixedAgent):
        def predict(self, observation):
            raise RuntimeError("boom")

    manager = AgentManager(threads=2)
    manager.register_agent(FixedAgent("fixed"))
    manager.register_agent(BrokenAgent("broken"))
    assert manager.list_agents() == ['fixed', 'broken']
    assert manager.initialize_all() == {'fixed': True, 'broken': True}

    observations = [
        Observation(f"ep{i}", np.zeros((2, 4, 8, 8), dtype=np.float32),
                    np.array([[0.1 * i, 0.2], [0.1 * i + 0.05, 0.2]]), 3)
        for i in range(4)
    ]
    results = manager.predict_all(observations)
    assert list(results) == ['fixed']
    assert 'broken' in manager.errors
    assert [r.episode_id for r in results['fixed']] == [o.episode_id for o in observations]
    assert all(r.horizon == 3 for r in results['fixed'])
    assert manager.get_all_status()['broken']['status'] == 'error'


# Runner

def collect_tests(module):
    return [(name, func) for name, func in inspect.getmembers(module, inspect.isfunction)
            if name.startswith('test_') and func.__module__ == module.__name__]


def run_module(module) -> int:
    """Run the test_* functions of one module; returns the number of failures"""
    failures = 0
    tests = sorted(collect_tests(module), key=lambda item: item[1].__code__.co_firstlineno)
    print("\n" + "=" * 60)
    print(f"{module.__name__} ({len(tests)} tests)")
    print("=" * 60)
    for name, func in tests:
        started = time.perf_counter()
        try:
            if 'tmp_path' in inspect.signature(func).parameters:
                with tempfile.TemporaryDirectory() as directory:
                    func(tmp_path=Path(directory))
            else:
                func()
            print(f"✓ {name} ({time.perf_counter() - started:.1f}s)")
        except Exception:
            failures += 1
            print(f"✗ {name}")
            traceback.print_exc()
    return failures


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("PixelNav - Test Suite")
    print("=" * 60)

    root = Path(__file__).parent
    names = ['test_platform'] + sorted(p.stem for p in root.glob('test_*.py') if p.stem != 'test_platform')
    results = []
    for name in names:
        try:
            module = sys.modules[__name__] if name == 'test_platform' else importlib.import_module(name)
            results.append((name, run_module(module)))
        except Exception as e:
            print(f"\n✗ {name} crashed on import: {e}")
            results.append((name, -1))

    # Summary
    print("\n" + "=" * 60)
    print("Test Summary")
    print("=" * 60)

    passed = sum(1 for _, failures in results if failures == 0)
    total = len(results)

    for name, failures in results:
        status = "✅ PASSED" if failures == 0 else "❌ FAILED"
        print(f"{status} - {name}")

    print(f"\n{passed}/{total} test modules passed")

    if passed == total:
        print("\n🎉 All tests passed!")
        return 0
    else:
        print("\n⚠️  Some tests failed. Please check the output above.")
        return 1


if __name__ == "__main__":
    sys.exit(main())
