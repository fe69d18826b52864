"""PixelNav - goal-conditioned offline RL for pixel-space trajectory prediction"""

__version__ = "1.0.0"
__author__ = "PixelNav Developers"
__description__ = "Goal-conditioned offline CQL for pixel-space needle trajectory prediction"

import sys

# Ensure Python 3.10+
if sys.version_info < (3, 10):
    raise RuntimeError("PixelNav requires Python 3.10 or higher")
