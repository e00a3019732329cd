"""Test package anchor; shared builders live in helpers.py."""
