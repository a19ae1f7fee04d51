"""Rule extraction from data and from trained feedforward networks."""
