"""V1 schemas package."""
