"""Scene domain model, generator and record IO."""
