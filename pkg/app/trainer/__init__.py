"""Three-stage training loop, optimizer and train configuration."""
