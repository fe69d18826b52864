"""Logging utility for PixelNav"""

import logging
import sys
from pathlib import Path
from datetime import datetime
from typing import Dict, Optional
import colorlog

FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
CONSOLE_FORMAT = '%(log_color)s%(asctime)s - %(name)s - %(levelname)s%(reset)s - %(message)s'
LOG_COLORS = {
    'DEBUG': 'cyan',
    'INFO': 'green',
    'WARNING': 'yellow',
    'ERROR': 'red',
    'CRITICAL': 'red,bg_white',
}


def _level_number(level: str) -> int:
    return getattr(logging, str(level).upper(), logging.INFO)


class Logger:
    """Named logger with a daily DEBUG file under log_dir and a colored console on stderr"""

    def __init__(self, name: str = "PixelNav", log_dir: str = "logs", level: str = "INFO"):
        self.name = name
        self.log_dir = Path(log_dir)
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        # Prevent duplicate handlers
        if self.logger.handlers:
            return

        console = colorlog.StreamHandler(sys.stderr)
        console.setLevel(_level_number(level))
        console.setFormatter(colorlog.ColoredFormatter(CONSOLE_FORMAT, datefmt='%H:%M:%S', log_colors=LOG_COLORS))
        self.logger.addHandler(console)
        self.logger.addHandler(self._file_handler())

    def _file_handler(self) -> logging.FileHandler:
        self.log_dir.mkdir(parents=True, exist_ok=True)
        log_file = self.log_dir / f"pixelnav_{datetime.now().strftime('%Y%m%d')}.log"
        handler = logging.FileHandler(log_file, encoding='utf-8')
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
        return handler

    def set_log_dir(self, log_dir: str) -> None:
        """Move the file output; the old file is closed"""
        if Path(log_dir) == self.log_dir and any(isinstance(h, logging.FileHandler) for h in self.logger.handlers):
            return
        for handler in [h for h in self.logger.handlers if isinstance(h, logging.FileHandler)]:
            self.logger.removeHandler(handler)
            handler.close()
        self.log_dir = Path(log_dir)
        self.logger.addHandler(self._file_handler())

    def set_level(self, level: str) -> None:
        """Change the console verbosity; the file always records DEBUG"""
        for handler in self.logger.handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setLevel(_level_number(level))

    def debug(self, message: str, *args, **kwargs) -> None:
        self.logger.debug(message, *args, **kwargs)

    def info(self, message: str, *args, **kwargs) -> None:
        self.logger.info(message, *args, **kwargs)

    def warning(self, message: str, *args, **kwargs) -> None:
        self.logger.warning(message, *args, **kwargs)

    def error(self, message: str, *args, **kwargs) -> None:
        self.logger.error(message, *args, **kwargs)

    def exception(self, message: str, *args, **kwargs) -> None:
        """Log at ERROR with the active traceback"""
        self.logger.exception(message, *args, **kwargs)


# Logger instances by name
_loggers: Dict[str, Logger] = {}
_log_dir: str = "logs"
_level: str = "INFO"


def configure_logging(log_dir: Optional[str] = None, level: Optional[str] = None) -> None:
    """Point every logger, existing and future, at log_dir and the console level"""
    global _log_dir, _level
    if log_dir is not None:
        _log_dir = log_dir
        for logger in _loggers.values():
            logger.set_log_dir(log_dir)
    if level is not None:
        _level = level
        for logger in _loggers.values():
            logger.set_level(level)


def get_logger(name: str = "PixelNav") -> Logger:
    """Get or create the logger instance for a name"""
    if name not in _loggers:
        _loggers[name] = Logger(name, log_dir=_log_dir, level=_level)
    return _loggers[name]
