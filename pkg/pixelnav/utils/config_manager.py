"""Configuration Manager for PixelNav"""

import copy
import hashlib
import json
import os
import yaml
from typing import Any, Dict, List, Optional, Sequence, Tuple
from pathlib import Path

from ..core.exceptions import ConfigError


DEFAULT_CONFIG: Dict[str, Any] = {
    'seed': 42,
    'threads': 1,
    'paths': {
        'out_dir': 'runs',
        'corpus_dir': None,
    },
    'logging': {
        'level': 'INFO',
        'log_dir': 'logs',
    },
    'database': {
        'path': 'pixelnav.db',
    },
    'trajectory': {
        'confidence_min': 0.45,
        'confidence_max': 0.9,
    },
    'actions': {
        'delta_max': 0.05,
        'idle_eps': 1e-4,
    },
    'reward': {
        'r_time': -0.01,
        'r_prox_max': 0.5,
        'tau_dist': 0.02,
        'clamp_prox_at': None,
    },
    'episode': {
        'mode': 'keyframe',
        't_obs': 6,
        't_pred': 3,
        'lookahead': 1,
        'frame_stride': 3,
        'bucket_boundaries': [8, 12, 16],
        'batch_size': 8,
    },
    'encoder': {
        'crop_size': 32,
        'crop_extent_px': 128,
        'channels': [16, 32, 64],
        'kernel_size': 3,
        'stride': 2,
        'model_dim': 128,
        'heads': 4,
        'layers': 2,
        'freq_pairs': 8,
        'coord_dim': 32,
        'state_dim': 128,
        'hidden_dim': 128,
        'guidance_radius': 2,
    },
    'training': {
        'epochs': 100,
        'alpha_cql': 0.01,
        'gamma': 0.95,
        'tau_soft': 0.005,
        'alpha_entropy': 0.2,
        'lambda_mag': 1.0,
        'policy_weight': 1.0,
        'bc_weight': 1.0,
        'lr_encoder': 1e-4,
        'lr_actor': 3e-4,
        'lr_critic': 3e-4,
        'lr_mag': 3e-4,
        'lr_floor_ratio': 0.01,
        'max_transitions_per_update': 2048,
        'clamp_magnitude_target': True,
        'debug_nonfinite': False,
    },
    'guidance': {
        'window': 10,
        'quad_min_points': 5,
    },
    'baselines': {
        'bc_epochs': 100,
        'bc_lr': 3e-4,
        'train_bc': True,
    },
    'synth': {
        'count': 280,
        'scenes': 56,
        'frame_span_min': 40,
        'frame_span_max': 90,
        'keyframes': 9,
        'curvature_max': 1.2,
        'noise_px': 1.5,
        'width': 1264,
        'height': 902,
        'texture_complexity': 4,
        'max_keyframe_step': 0.045,
        'split_ratios': [0.72, 0.14, 0.14],
    },
    'evaluation': {
        'split': 'val',
        'seeds': [42, 123, 456, 789, 1024],
        'qcurve_episodes': 8,
        'dominance_tolerance': 1e-6,
    },
}

# Sections that determine a trained model; their hash is stored in checkpoints
MODEL_SECTIONS = ('trajectory', 'actions', 'reward', 'episode', 'encoder', 'training')

PRESETS: Dict[str, Dict[str, Any]] = {
    'obs6pred3': {'episode.t_obs': 6, 'episode.t_pred': 3},
    'obs3pred6': {'episode.t_obs': 3, 'episode.t_pred': 6},
}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """Manages application configuration"""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = Path(config_path) if config_path else None
        self.config: Dict[str, Any] = copy.deepcopy(DEFAULT_CONFIG)
        self.warnings: List[str] = []
        self.load_config()

    def load_config(self) -> None:
        """Load configuration from YAML file over the built-in defaults"""
        if self.config_path is None:
            default_path = Path("config.yaml")
            if not default_path.exists():
                self.warnings.append("config.yaml not found, using built-in defaults")
                return
            self.config_path = default_path

        if not self.config_path.exists():
            raise FileNotFoundError(
                f"Configuration file not found: {self.config_path}\n"
                "Please create one from config.example.yaml"
            )

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            line = mark.line + 1 if mark is not None else None
            problem = getattr(e, 'problem', None) or str(e)
            raise ConfigError(f"Invalid YAML in {self.config_path}: {problem}", line=line)

        if not isinstance(loaded, dict):
            raise ConfigError(f"Top level of {self.config_path} must be a mapping")

        self.config = _deep_merge(DEFAULT_CONFIG, loaded)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation
        Example: get('training.alpha_cql')
        """
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict):
                if k not in value:
                    return default
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value: Any) -> None:
        """
        Set configuration value using dot notation
        Example: set('episode.t_obs', 6)
        """
        keys = key.split('.')
        config = self.config

        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value

    def section(self, name: str) -> Dict[str, Any]:
        """Return a copy of one top-level section"""
        return copy.deepcopy(self.config.get(name, {}))

    def apply_preset(self, name: str) -> None:
        """
        Apply a named experiment preset (obs6pred3, obs3pred6, or one from the
        file's `presets` section, whose keys belong to `episode`)
        """
        presets = dict(PRESETS)
        for preset, values in (self.get('presets') or {}).items():
            presets[preset] = {f"episode.{key}": value for key, value in (values or {}).items()}
        if name not in presets:
            raise ConfigError(f"Unknown preset: {name}. Choose from {', '.join(presets)}")
        for key, value in presets[name].items():
            self.set(key, value)

    def save_config(self, path: Optional[str] = None) -> Path:
        """Save configuration to YAML file"""
        target = Path(path) if path else (self.config_path or Path("config.yaml"))
        target.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(target, 'w', encoding='utf-8') as f:
                yaml.safe_dump(self.config, f, default_flow_style=False, sort_keys=False)
        except OSError as e:
            raise IOError(f"Failed to save configuration: {e}")
        return target

    def config_hash(self, sections: Optional[Sequence[str]] = None) -> str:
        """SHA-256 of the canonical JSON form of the effective config, or of selected sections"""
        subject = self.config if sections is None else {name: self.config.get(name) for name in sections}
        canonical = json.dumps(subject, sort_keys=True, separators=(',', ':'), default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def validate_config(self) -> Tuple[bool, List[str]]:
        """
        Validate configuration
        Returns: (is_valid, list of errors)
        """
        errors = []

        def positive(key: str) -> None:
            value = self.get(key)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                errors.append(f"{key} must be a positive number (got {value!r})")

        def positive_int(key: str) -> None:
            value = self.get(key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                errors.append(f"{key} must be an integer >= 1 (got {value!r})")

        delta_max = self.get('actions.delta_max')
        if not isinstance(delta_max, (int, float)) or not 0 < delta_max <= 1:
            errors.append(f"actions.delta_max must lie in (0, 1] (got {delta_max!r})")
        positive('actions.idle_eps')

        conf_min, conf_max = self.get('trajectory.confidence_min'), self.get('trajectory.confidence_max')
        if not all(isinstance(v, (int, float)) for v in (conf_min, conf_max)) or not 0 <= conf_min <= conf_max <= 1:
            errors.append("trajectory.confidence_min/max must satisfy 0 <= min <= max <= 1")

        positive('reward.tau_dist')
        positive('reward.r_prox_max')

        for key in ('episode.t_obs', 'episode.t_pred', 'episode.lookahead',
                    'episode.batch_size', 'episode.frame_stride'):
            positive_int(key)
        if self.get('episode.mode') not in ('keyframe', 'dense'):
            errors.append(f"episode.mode must be 'keyframe' or 'dense' (got {self.get('episode.mode')!r})")
        boundaries = self.get('episode.bucket_boundaries', [])
        if any(later <= earlier for earlier, later in zip(boundaries, boundaries[1:])):
            errors.append("episode.bucket_boundaries must be strictly increasing")

        for key in ('training.alpha_cql', 'training.tau_soft', 'training.alpha_entropy',
                    'training.lambda_mag', 'training.lr_encoder', 'training.lr_actor',
                    'training.lr_critic', 'training.lr_mag', 'training.lr_floor_ratio'):
            positive(key)
        gamma = self.get('training.gamma')
        if not isinstance(gamma, (int, float)) or not 0 < gamma < 1:
            errors.append(f"training.gamma must lie in (0, 1) (got {gamma!r})")
        positive_int('training.epochs')
        positive_int('training.max_transitions_per_update')

        window = self.get('guidance.window')
        if not isinstance(window, int) or window < 2:
            errors.append(f"guidance.window must be an integer >= 2 (got {window!r})")

        positive_int('encoder.crop_size')
        positive_int('encoder.model_dim')
        positive_int('encoder.heads')
        if self.get('encoder.model_dim', 0) % max(self.get('encoder.heads', 1), 1) != 0:
            errors.append("encoder.model_dim must be divisible by encoder.heads")

        positive_int('threads')
        if self.get('evaluation.split') not in ('train', 'val', 'test'):
            errors.append(f"evaluation.split must be train, val or test (got {self.get('evaluation.split')!r})")
        seeds = self.get('evaluation.seeds', [])
        if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
            errors.append("evaluation.seeds must be a non-empty list of integers")

        positive_int('synth.count')
        positive_int('synth.scenes')
        if self.get('synth.noise_px', 0) < 0:
            errors.append("synth.noise_px must be >= 0")
        if self.get('synth.frame_span_min', 0) > self.get('synth.frame_span_max', 0):
            errors.append("synth.frame_span_min must not exceed synth.frame_span_max")

        return len(errors) == 0, errors

    def __repr__(self) -> str:
        return f"<ConfigManager: {self.config_path or 'defaults'}>"


# Global config instance
_config: Optional[ConfigManager] = None


def get_config(config_path: Optional[str] = None, reload: bool = False) -> ConfigManager:
    """Get or create global config instance"""
    global _config
    if _config is None or reload:
        _config = ConfigManager(config_path)
    return _config


def default_out_dir(fallback: Optional[str] = None) -> str:
    """Output directory from PIXELNAV_OUT_DIR, falling back to the given or built-in default"""
    return os.environ.get('PIXELNAV_OUT_DIR') or fallback or DEFAULT_CONFIG['paths']['out_dir']
