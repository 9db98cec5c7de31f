"""Medication-annotation workbench: LLM span extraction, ensembling,
scoring, and human refinement tooling."""

__version__ = "0.1.0"
