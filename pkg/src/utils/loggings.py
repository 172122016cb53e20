import os
import sys
import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

from config.settings import settings

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def setup_logging(
    mode: str = "cli",
    log_name: Optional[str] = None,
    level: int = logging.DEBUG,
    console_level: int = logging.INFO,
    log_dir: Optional[Path] = None,
) -> Path:
    """
    Setup logging to file and console with UTF-8 support.

    Args:
        mode: "cli" for commands, "test" for pytest runs
        log_name: Optional prefix for the log filename
        level: Level of the file handler (default to DEBUG to catch all details)
        console_level: Level of the console handler
        log_dir: Root log directory; defaults to settings.log_dir

    Returns:
        Path of the log file
    """
    # Ensure stdout/stderr can handle UTF-8 symbols on Windows
    if sys.platform == "win32":
        try:
            if hasattr(sys.stdout, 'reconfigure'):
                sys.stdout.reconfigure(encoding='utf-8')
            if hasattr(sys.stderr, 'reconfigure'):
                sys.stderr.reconfigure(encoding='utf-8')
        except Exception:
            pass

    timestamp = datetime.now().strftime('%Y-%m-%d_%H-%M-%S')

    if mode == "test":
        folder = "tests"
        filename = f"test_{log_name}_{timestamp}.log" if log_name else f"test_debug_{timestamp}.log"
    else:
        folder = mode
        filename = f"{log_name}-{timestamp}.log" if log_name else f"recast-{timestamp}.log"

    log_file = Path(log_dir or settings.log_dir) / folder / filename
    os.makedirs(os.path.dirname(log_file), exist_ok=True)

    file_handler = logging.FileHandler(log_file, encoding='utf-8')
    file_handler.setLevel(level)
    # console goes to stderr so command output on stdout stays clean
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(console_level)

    logging.basicConfig(
        level=min(level, console_level),
        format=LOG_FORMAT,
        handlers=[file_handler, stream_handler],
        force=True
    )
    # third-party loggers stay at WARNING
    for noisy in ("torch",):
        logging.getLogger(noisy).setLevel(logging.WARNING)
    return log_file
