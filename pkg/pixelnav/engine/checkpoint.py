"""Versioned .npz checkpoints written atomically"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from ..core.exceptions import CheckpointError

CHECKPOINT_FORMAT = "pixelnav-checkpoint"
CHECKPOINT_VERSION = 1
_METADATA_KEY = "__metadata__"


def save_checkpoint(path, arrays: Dict[str, np.ndarray], metadata: Dict[str, Any]) -> Path:
    """
    Write named arrays plus JSON metadata to path

    The file is written next to its destination and renamed into place, so a
    reader never sees a partial checkpoint.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if _METADATA_KEY in arrays:
        raise CheckpointError(f"Array name {_METADATA_KEY} is reserved")

    header = dict(metadata, format=CHECKPOINT_FORMAT, version=CHECKPOINT_VERSION)
    payload = dict(arrays)
    payload[_METADATA_KEY] = np.array(json.dumps(header, sort_keys=True))

    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, 'wb') as f:
            np.savez(f, **payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def load_checkpoint(path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read a checkpoint; returns (arrays, metadata)"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {name: data[name] for name in data.files}
    except (OSError, ValueError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}")

    if _METADATA_KEY not in arrays:
        raise CheckpointError(f"{path} has no metadata record")
    metadata = json.loads(str(arrays.pop(_METADATA_KEY)))
    if metadata.get('format') != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a pixelnav checkpoint")
    if metadata.get('version') != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {metadata.get('version')} in {path}")
    return arrays, metadata
