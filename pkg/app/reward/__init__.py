"""Planning-oriented rollout reward."""
