import sys
from pathlib import Path
from typing import Optional

from loguru import logger

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}"


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Configure Loguru sinks: stderr always, a rotating file when requested."""
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_path),
            level=level.upper(),
            rotation="1 MB",
            retention="1 week",
            compression="zip",
            enqueue=True,
            format=LOG_FORMAT,
        )
        logger.debug(f"Logging to {log_path.resolve()}")
