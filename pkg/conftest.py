"""
Global pytest configuration.
"""

import logging


def pytest_configure(config):
    """Configure pytest options programmatically."""
    # Keep library debug output out of captured logs unless asked for
    logging.getLogger("coupled_mkv").setLevel(logging.INFO)
