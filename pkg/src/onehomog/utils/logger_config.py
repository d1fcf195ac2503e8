import logging
from datetime import datetime
from pathlib import Path

from onehomog.config import OneHomogConfig


def logger_setup(name: str) -> logging.Logger:
    """
    Setup logging configuration
    returns:
        logging.Logger: Logger object
    """
    logger = logging.getLogger(name)
    # already configured by an earlier import, don't stack handlers
    if logger.handlers:
        return logger

    config = OneHomogConfig()
    # project root is three levels up from src/onehomog/utils/
    project_root = Path(__file__).parent.parent.parent.parent
    log_dir = config.log_dir or project_root / "logs"
    level = getattr(logging, config.log_level)

    # format the logger, (time format, log level, message itself)
    formatter = logging.Formatter(
        "%(asctime)s - %(levelname)s - %(message)s", "%Y-%m-%d %H:%M:%S"
    )
    logger.setLevel(level)

    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file_name = f"logging_{datetime.now().strftime('%Y-%m-%d')}.log"
        file_handler = logging.FileHandler(log_dir / log_file_name)
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    except OSError as e:
        # read-only checkouts still get console output
        print(f"Could not create the logs directory: {e}")

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    return logger
