"""Discrete-event network simulator for hopping-protected services."""

from .engine import EventLog, Scheduler
from .metrics import REASONS, RunMetrics
from .observer import ObserverError, ObserverReport, homogeneity, observer_report, uniformity
from .simulation import Simulation, build, run
from .topology import flood_scenario, standard_scenario

__all__ = [
    "EventLog", "ObserverError", "ObserverReport", "REASONS", "RunMetrics", "Scheduler",
    "Simulation", "build", "flood_scenario", "homogeneity", "observer_report", "run",
    "standard_scenario", "uniformity",
]
