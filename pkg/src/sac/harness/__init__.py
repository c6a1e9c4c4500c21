"""Experiment orchestration, file formats and the ``sac`` command line."""
