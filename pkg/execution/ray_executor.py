import logging
from typing import Any, Callable

import ray

logger = logging.getLogger(__name__)


@ray.remote
def execute_trial(fn: Callable[[int], Any], seed: int) -> Any:
    """Ray remote function running one seeded trial."""
    return fn(seed)


class RayExecutor:
    """Runs seeded trials as Ray tasks."""

    def __init__(self):
        # Ensure Ray is initialized
        if not ray.is_initialized():
            ray.init(ignore_reinit_error=True)

    def run(self, fn: Callable[[int], Any], seeds: list[int]) -> list[tuple[Any, str | None]]:
        """
        Launch every trial, then collect them in submission order. A failed
        trial yields (None, error message) instead of raising.
        """
        logger.info(f"Submitting {len(seeds)} trials to Ray")
        refs = [execute_trial.remote(fn, seed) for seed in seeds]
        results = []
        for seed, ref in zip(seeds, refs):
            try:
                results.append((ray.get(ref), None))
            except Exception as e:
                logger.error(f"Trial with seed {seed} failed: {str(e)}")
                results.append((None, str(e)))
        return results
