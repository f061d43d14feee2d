import logging

__version__ = "0.1.0"
version_info = __version__.split(".")

_logger = logging.getLogger("notchkin")
_logger.addHandler(logging.NullHandler())

# One line per CLI subcommand outcome. The CLI decides where it goes.
run_log = logging.getLogger("notchkin.runlog")
run_log.setLevel(logging.INFO)
