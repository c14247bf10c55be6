"""Curriculum task construction from classifier-scored pairs."""
from .tasks import (
    STRATEGIES, CurriculumWarning, ScoredPair, SplitConfig, Task, balance_task, read_manifest,
    split_tasks, write_manifest,
)

__all__ = ["STRATEGIES", "CurriculumWarning", "ScoredPair", "SplitConfig", "Task", "balance_task",
           "read_manifest", "split_tasks", "write_manifest"]
