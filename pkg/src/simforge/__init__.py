"""simforge: text-similarity metrics, graph topic modelling, and adversarial
probes for overlap-based scorers."""

__version__ = "0.1.0"
