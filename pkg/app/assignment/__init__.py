"""Interaction selection and joint-mode assignment."""
