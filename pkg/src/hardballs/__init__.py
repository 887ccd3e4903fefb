"""Hard-ball billiards on the flat torus: event-driven flow and neutral-space analysis."""
__version__ = "0.1.0"
