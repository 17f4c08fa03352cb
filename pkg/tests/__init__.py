"""Tests for timebin_gates package."""
