"""
Main application entry point.
"""

import logging
import sys
from typing import List, Optional

import click

from cli import COMMANDS
from core.config import Settings, get_settings
from core.exception_handlers import EXIT_OK, handle_exception

logger: logging.Logger = logging.getLogger(__name__)

PROG_NAME = "slowfast-mdp"


def configure_logging(settings: Optional[Settings] = None):
    """Configure the root logger once from LoggingSettings"""
    settings = settings or get_settings()
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.logging.file_path:
        handlers.append(logging.FileHandler(settings.logging.file_path, encoding="utf-8"))
    logging.basicConfig(level=settings.logging.level, format=settings.logging.format, handlers=handlers)


def create_application() -> click.Group:
    """
    Application factory.
    Builds the command group and registers every subcommand.
    """

    @click.group(name=PROG_NAME, help="Moderate deviations of slow-fast diffusions: validation, rate "
                                      "ingredients, action minimization and rare-event estimation.")
    @click.version_option("1.0.0", prog_name=PROG_NAME)
    def app():
        pass

    for command in COMMANDS:
        app.add_command(command)
    return app


def run_subcommand(argv: List[str]) -> int:
    """
    Run one subcommand and return its exit code: 0 on success, 2 when the
    condition report fails, 1 on runtime errors and 64 on malformed flags.
    """
    app = create_application()
    try:
        app.main(args=list(argv), prog_name=PROG_NAME, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        logger.info("Aborted")
        return 1
    except Exception as exc:
        return handle_exception(exc)
    return EXIT_OK


def main():
    configure_logging()
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
