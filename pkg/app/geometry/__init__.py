"""Planar geometric primitives."""
