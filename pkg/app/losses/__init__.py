"""Supervised training objectives."""
