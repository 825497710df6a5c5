"""Tensor autodiff and neural building blocks."""
