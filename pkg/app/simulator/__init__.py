"""Closed-loop simulation and evaluation."""
