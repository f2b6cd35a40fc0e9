"""
Entry point for the islanded-microgrid toolkit.

    python app.py validate --fixture toy3
    python app.py feasibility --fixture toy3 --load-factors 1.02,1.05,1.08
"""
import sys
from pathlib import Path

from loguru import logger

from config.settings import settings
from src.cli import run

# Configure logger
logger.remove()
logger.add(sys.stderr, level=settings.log_level)
Path(settings.log_dir).mkdir(parents=True, exist_ok=True)
logger.add(str(Path(settings.log_dir) / "microgrid_{time}.log"), rotation="1 day", retention="7 days", level="DEBUG")


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
