"""
Tests for logger module.
"""

import logging
import sys

from powgame.utils.logger import get_logger, setup_logging


class TestGetLogger:
    """Tests for get_logger function."""

    def test_returns_logger_with_correct_name(self) -> None:
        """Test that logger has the requested name."""
        # Act
        logger = get_logger("powgame.test_module")

        # Assert
        assert logger.name == "powgame.test_module"
        assert isinstance(logger, logging.Logger)

    def test_returns_same_logger_for_same_name(self) -> None:
        """Test that same logger instance is returned for same name."""
        assert get_logger("same_name") is get_logger("same_name")

    def test_logger_has_handlers(self) -> None:
        """Test that the logger or its parent has a handler configured."""
        # Arrange
        setup_logging()

        # Act
        logger = get_logger("test_with_handlers")

        # Assert
        has_handlers = len(logger.handlers) > 0 or (logger.parent and len(logger.parent.handlers) > 0)
        assert has_handlers


class TestSetupLogging:
    """Tests for setup_logging function."""

    def test_level_is_applied(self) -> None:
        """Test the root logger takes the requested level."""
        # Act
        setup_logging(level="DEBUG")

        # Assert
        assert logging.getLogger().level == logging.DEBUG
        setup_logging(level="INFO")
        assert logging.getLogger().level == logging.INFO

    def test_idempotent(self) -> None:
        """Test repeated calls do not stack handlers."""
        # Arrange
        setup_logging()
        count = len(logging.getLogger().handlers)

        # Act
        setup_logging()
        setup_logging(level="WARNING")

        # Assert
        assert len(logging.getLogger().handlers) == count
        setup_logging(level="INFO")

    def test_unknown_level_falls_back_to_info(self) -> None:
        """Test a misspelled level does not raise."""
        setup_logging(level="LOUD")
        assert logging.getLogger().level == logging.INFO

    def test_console_handler_writes_to_stderr(self) -> None:
        """Test logs never mix into stdout, which carries CSV output."""
        setup_logging()
        streams = [getattr(h, "stream", None) for h in logging.getLogger().handlers]
        assert sys.stdout not in streams
