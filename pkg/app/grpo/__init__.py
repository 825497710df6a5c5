"""Group-relative policy alignment of the ego planner."""
