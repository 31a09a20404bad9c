"""drgkit: DRG prediction toolkit (catalog, harmonization, cohort, model, metrics)."""

__version__ = "0.1.0"
