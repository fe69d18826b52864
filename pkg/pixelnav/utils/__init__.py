"""Utils package initialization"""

from .config_manager import ConfigManager, get_config
from .logger import Logger, get_logger
from .database import RunDatabase
from .archive import CropArchive

__all__ = [
    'ConfigManager',
    'get_config',
    'Logger',
    'get_logger',
    'RunDatabase',
    'CropArchive',
]
