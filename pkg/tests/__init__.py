"""Tests for frachk."""
