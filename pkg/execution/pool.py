"""
Trial-level parallelism for multi-start runs and Monte Carlo sweeps.

Trial k of a sweep started at `seed` receives derive_seed(seed, k). Results
come back in index order whatever order the workers finish in, so a sweep is
reproducible from its arguments.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Generic, TypeVar

from core.config import MAX_WORKERS, USE_RAY
from core.rng import derive_seed

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class TrialOutcome(Generic[T]):
    index: int
    seed: int
    result: T | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _guarded(fn: Callable[[int], T], seed: int) -> tuple[T | None, str | None]:
    try:
        return fn(seed), None
    except Exception as e:
        logger.warning(f"Trial with seed {seed} failed: {type(e).__name__}: {str(e)}")
        return None, f"{type(e).__name__}: {e}"


def run_trials(
    fn: Callable[[int], T],
    count: int,
    seed: int,
    use_ray: bool = USE_RAY,
    max_workers: int = MAX_WORKERS,
) -> list[TrialOutcome[T]]:
    """Run fn(seed + k) for k < count; exceptions become failed outcomes."""
    seeds = [derive_seed(seed, k) for k in range(count)]
    if count == 0:
        return []

    if use_ray:
        from execution.ray_executor import RayExecutor

        pairs: list[tuple[Any, str | None]] = RayExecutor().run(fn, seeds)
    elif max_workers <= 1 or count == 1:
        pairs = [_guarded(fn, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            pairs = list(executor.map(lambda s: _guarded(fn, s), seeds))

    outcomes = [
        TrialOutcome(index=k, seed=s, result=res, error=err)
        for k, (s, (res, err)) in enumerate(zip(seeds, pairs))
    ]
    failed = sum(not o.ok for o in outcomes)
    logger.info(f"Ran {count} trials from seed {seed} ({failed} failed)")
    return outcomes
