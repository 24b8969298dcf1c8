"""Command line, experiment orchestration, recovery classification and front statistics."""
