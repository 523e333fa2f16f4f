"""Game-state guided recovery of lost cloud-gaming video frames."""
