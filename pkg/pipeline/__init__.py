"""End-to-end pipeline over one run directory."""
from .runner import PipelineResult, PipelineRunner, RunPaths

__all__ = ["PipelineResult", "PipelineRunner", "RunPaths"]
