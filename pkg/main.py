#!/usr/bin/env python3
"""
Main entry point for the non-Abelian non-Hermitian quasicrystal laboratory.
Configures logging and hands the command line to src.cli.
"""

import logging
import signal
import sys
from pathlib import Path

# Add src directory to Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.cli.main import main as cli_main


def setup_logging(level: str = "INFO", quiet: bool = False):
    """Configure logging for the application."""
    # Ensure logs directory exists
    logs_dir = Path("logs")
    logs_dir.mkdir(exist_ok=True)

    handlers = [logging.FileHandler(logs_dir / 'nhqc_lab.log')]
    if not quiet:
        handlers.append(logging.StreamHandler(sys.stdout))

    logging.basicConfig(
        level=getattr(logging, level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers
    )


def signal_handler(signum, frame):
    """Turn SIGTERM into the same path as Ctrl+C so checkpoints are flushed."""
    logging.info(f"Received signal {signum}, shutting down...")
    raise KeyboardInterrupt


def main():
    signal.signal(signal.SIGTERM, signal_handler)
    sys.exit(cli_main(configure_logging=setup_logging))


if __name__ == "__main__":
    main()
