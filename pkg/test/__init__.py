"""Tests for abc-torus."""
