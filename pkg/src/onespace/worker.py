import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

from onespace.errors import SimulationCancelled
from onespace.models import CategoryTally, ExperimentPlan, TimeSlotModel
from onespace.sampling import EMPTY_TALLY, ChunkTally, tally_chunk

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 65536

# (category label, trials done, trials total)
ProgressCallback = Callable[[str, int, int], None]


class SimulationWorker:
    """Runs the trials of an experiment plan in chunks over a thread pool."""

    def __init__(
        self,
        workers: int = 1,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        progress: Optional[ProgressCallback] = None,
    ):
        if workers < 1:
            raise ValueError("workers must be at least 1")
        if chunk_size < 1:
            raise ValueError("chunk_size must be at least 1")
        self.workers = workers
        self.chunk_size = chunk_size
        self.progress = progress
        self._is_running = False
        self.should_cancel = False

    def chunks(self, trials: int) -> list[tuple[int, int]]:
        return [(start, min(self.chunk_size, trials - start)) for start in range(0, trials, self.chunk_size)]

    def run(self, model, plan: ExperimentPlan) -> list[CategoryTally]:
        if self._is_running:
            raise RuntimeError("Simulation already in progress")
        self._is_running = True
        self.should_cancel = False
        try:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return [
                    self._run_category(pool, model, plan, index, category)
                    for index, category in enumerate(plan.categories)
                ]
        finally:
            self._is_running = False

    def _run_category(self, pool, model, plan, index, category) -> CategoryTally:
        chunks = self.chunks(plan.trials)
        logger.debug(f"Category {category.label}: {plan.trials} trials in {len(chunks)} chunks")
        futures = [
            pool.submit(tally_chunk, model, category, index, plan.seed, start, count)
            for start, count in chunks
        ]
        tally: ChunkTally = EMPTY_TALLY
        done = 0
        for future, (_, count) in zip(futures, chunks):
            if self.should_cancel:
                for pending in futures:
                    pending.cancel()
                raise SimulationCancelled(f"Simulation cancelled during category {category.label}")
            tally = tally.merge(future.result())
            done += count
            if self.progress:
                self.progress(category.label, done, plan.trials)

        slot = model.slot(category.label) if isinstance(model, TimeSlotModel) else None
        n_pp, n_pm, n_mp, n_mm = tally.counts
        return CategoryTally(
            category=category.label,
            station1=category.station1,
            station2=category.station2,
            n_pp=n_pp,
            n_pm=n_pm,
            n_mp=n_mp,
            n_mm=n_mm,
            total=plan.trials,
            slot=slot,
            first_time=tally.first_time,
            last_time=tally.last_time,
        )

    def cancel(self):
        """Cancel the ongoing simulation at the next chunk boundary."""
        self.should_cancel = True
