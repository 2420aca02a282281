import logging
import os
import sys
from logging.handlers import TimedRotatingFileHandler


class Logger:
    _instance = None

    def __new__(cls, name="verdad"):
        if cls._instance is None:
            cls._instance = super(Logger, cls).__new__(cls)
            cls._instance._initialize(name)
        return cls._instance

    def _initialize(self, name):
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)

        self.file_formatter = logging.Formatter(
            '[%(asctime)s] [%(levelname)s] [%(filename)s:%(lineno)d] - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        console_formatter = logging.Formatter(
            '[%(asctime)s] [%(levelname)s] - %(message)s',
            datefmt='%H:%M:%S'
        )

        self.console_handler = None
        for h in self.logger.handlers:
            if isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler):
                self.console_handler = h

        # stdout is reserved for the --json report echo
        if self.console_handler is None:
            self.console_handler = logging.StreamHandler(sys.stderr)
            self.console_handler.setLevel(logging.INFO)
            self.console_handler.setFormatter(console_formatter)
            self.logger.addHandler(self.console_handler)

    def set_verbose(self, verbose: bool) -> None:
        self.console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)

    def attach_file(self, log_file: str) -> None:
        """Also write the full debug log to ``log_file`` (rotated daily)."""
        for h in self.logger.handlers:
            if isinstance(h, TimedRotatingFileHandler) and h.baseFilename == os.path.abspath(log_file):
                return
        parent = os.path.dirname(os.path.abspath(log_file))
        os.makedirs(parent, exist_ok=True)
        file_handler = TimedRotatingFileHandler(
            log_file, when="midnight", interval=1, backupCount=30, encoding="utf-8"
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(self.file_formatter)
        self.logger.addHandler(file_handler)

    def get_logger(self):
        return self.logger


# Usage: from utils.logger import logger
logger = Logger().get_logger()
