"""From-scratch grid detector network (forward, loss, exact gradients)."""
