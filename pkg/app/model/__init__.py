"""Joint scene-mode network, features and checkpoints."""
