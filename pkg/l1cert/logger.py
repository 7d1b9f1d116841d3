import logging
import os
from datetime import datetime
from typing import Optional

# Global logger instance
_logger = None

def setup_logger(name: str = "l1cert", level: int = logging.INFO,
                 log_file: Optional[str] = None) -> logging.Logger:
    """
    Set up and configure the package logger

    Args:
        name: Logger name (library modules log as its children)
        level: Console logging level
        log_file: Optional log file path, written at DEBUG level

    Returns:
        Configured logger instance
    """
    global _logger

    if _logger is not None:
        _logger.setLevel(min(level, _logger.level))
        for handler in _logger.handlers:
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)
        return _logger

    logger = logging.getLogger(name)
    logger.setLevel(level if not log_file else min(level, logging.DEBUG))

    # Prevent duplicate handlers
    if logger.handlers:
        logger.handlers.clear()

    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    simple_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # Console handler; stdout carries JSON/CSV reports, so logs go to stderr
    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(simple_formatter)
    logger.addHandler(console_handler)

    if log_file:
        try:
            directory = os.path.dirname(log_file)
            if directory:
                os.makedirs(directory, exist_ok=True)

            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(detailed_formatter)
            logger.addHandler(file_handler)
        except OSError as e:
            logger.warning(f"Could not create file handler for {log_file}: {e}")

    logger.propagate = False
    _logger = logger
    return logger

def get_logger() -> logging.Logger:
    """Get the global logger instance"""
    if _logger is None:
        return setup_logger()
    return _logger

class RunLogger:
    """Logger that tallies verdicts and sweep outcomes over one command run"""

    def __init__(self, base_logger: Optional[logging.Logger] = None):
        self.logger = base_logger or get_logger()
        self.run_start_time = None
        self.run_name = None
        self.verdict_counts = {'Unique': 0, 'NotUnique': 0, 'Marginal': 0}
        self.sweep_counts = {'satisfied': 0, 'violated': 0}
        self.solver_failures = 0

    def start_run(self, name: str):
        """Log run start"""
        self.run_name = name
        self.run_start_time = datetime.now()
        self.logger.info("=" * 60)
        self.logger.info(f"{name.upper()} STARTED")
        self.logger.info("=" * 60)

    def end_run(self):
        """Log run end with summary"""
        end_time = datetime.now()
        duration = end_time - self.run_start_time if self.run_start_time else None

        self.logger.info("=" * 60)
        self.logger.info(f"{(self.run_name or 'run').upper()} COMPLETED")
        if duration:
            self.logger.info(f"Duration: {duration}")

        if any(self.verdict_counts.values()):
            summary = ", ".join(f"{k}: {v}" for k, v in self.verdict_counts.items())
            self.logger.info(f"  Verdicts: {summary}")
        if any(self.sweep_counts.values()):
            self.logger.info(f"  Sweep rows: {self.sweep_counts['satisfied']} satisfied, "
                             f"{self.sweep_counts['violated']} violated")
        if self.solver_failures:
            self.logger.info(f"  Solver failures: {self.solver_failures}")
        self.logger.info("=" * 60)

    def log_verdict(self, label: str, verdict: str, lp_value: float):
        """Log a Condition 1 verdict"""
        self.verdict_counts[verdict] = self.verdict_counts.get(verdict, 0) + 1
        self.logger.info(f"{label}: verdict {verdict} (lp_value {lp_value:.12g})")

    def log_sweep_row(self, model: str, seed: int, delta: float, satisfied: bool):
        """Log one sweep row"""
        key = 'satisfied' if satisfied else 'violated'
        self.sweep_counts[key] += 1
        if satisfied:
            self.logger.debug(f"Sweep {model} seed={seed} delta={delta:g}: bound satisfied")
        else:
            self.logger.warning(f"Sweep {model} seed={seed} delta={delta:g}: bound VIOLATED")

    def log_solver_failure(self, model: str, seed: int, error: str):
        """Log a solver failure that was recorded rather than raised"""
        self.solver_failures += 1
        self.logger.error(f"Solver failure in {model} (seed {seed}): {error}")

    def log_progress(self, operation: str, current: int, total: int):
        """Log batch processing progress"""
        percentage = (current / total * 100) if total > 0 else 0
        self.logger.info(f"{operation} progress: {current}/{total} ({percentage:.1f}%)")

    # Delegate other logging methods to base logger
    def debug(self, message):
        self.logger.debug(message)

    def info(self, message):
        self.logger.info(message)

    def warning(self, message):
        self.logger.warning(message)

    def error(self, message):
        self.logger.error(message)
