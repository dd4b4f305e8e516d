"""Desk-scale decision support for container-terminal time-slot management.

Forecasts truck demand, models gate queues and road-traffic costs, learns
carrier scheduling preferences and searches slot reassignments plus crane
allocations with a four-objective evolutionary optimizer.
"""

__version__ = "0.1.0"
