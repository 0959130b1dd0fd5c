"""
Entry point for ``python -m coupled_mkv``.
"""

from .cli import main

if __name__ == "__main__":
    main()
