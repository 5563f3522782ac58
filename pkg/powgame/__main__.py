"""
Main entry point for powgame when run as a module.
"""

from powgame.cli import app

if __name__ == "__main__":
    app()
