"""
Threaded worker pool for sweeps (feasibility samples, eigen grid points).
Results are merged in submission order, so the output does not depend on the
number of workers.
"""
import queue
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional

from loguru import logger

from config.settings import settings


class JobStatus(Enum):
    """Job status enumeration."""
    PENDING = "pending"
    PROCESSING = "processing"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class SweepJob:
    index: int
    payload: Any
    status: JobStatus = JobStatus.PENDING
    result: Any = None
    error: Optional[BaseException] = None


@dataclass
class SweepReport:
    jobs: List[SweepJob] = field(default_factory=list)

    @property
    def results(self) -> List[Any]:
        return [job.result for job in self.jobs]

    def stats(self) -> Dict[str, int]:
        counts = {status.value: 0 for status in JobStatus}
        for job in self.jobs:
            counts[job.status.value] += 1
        counts["total"] = len(self.jobs)
        return counts


class SweepPool:
    """
    Runs one handler over a list of payloads with a fixed number of worker threads.

    ``workers=1`` runs inline in the calling thread.
    """

    def __init__(self, workers: Optional[int] = None, name: str = "sweep"):
        self.workers = max(1, int(workers if workers is not None else settings.workers))
        self.name = name
        self.lock = threading.Lock()
        logger.debug(f"Sweep pool '{name}' initialized with {self.workers} workers")

    def run(self, handler: Callable[[Any], Any], payloads: Iterable[Any]) -> SweepReport:
        """
        Execute ``handler`` on every payload.

        A failing job is marked FAILED with its exception kept; the sweep continues.
        """
        jobs = [SweepJob(index=k, payload=p) for k, p in enumerate(payloads)]
        if self.workers == 1 or len(jobs) <= 1:
            for job in jobs:
                self._process_job(handler, job)
        else:
            pending: "queue.Queue[SweepJob]" = queue.Queue()
            for job in jobs:
                pending.put(job)
            threads = [
                threading.Thread(
                    target=self._worker_loop,
                    args=(handler, pending),
                    name=f"{self.name}-worker-{i}",
                    daemon=True,
                )
                for i in range(min(self.workers, len(jobs)))
            ]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join()

        report = SweepReport(jobs=sorted(jobs, key=lambda j: j.index))
        stats = report.stats()
        logger.debug(f"Sweep '{self.name}' finished: {stats}")
        return report

    def map(self, handler: Callable[[Any], Any], payloads: Iterable[Any]) -> List[Any]:
        """Results in submission order; failed jobs contribute None."""
        return self.run(handler, payloads).results

    def _worker_loop(self, handler: Callable[[Any], Any], pending: "queue.Queue[SweepJob]"):
        while True:
            try:
                job = pending.get_nowait()
            except queue.Empty:
                return
            self._process_job(handler, job)
            pending.task_done()

    def _process_job(self, handler: Callable[[Any], Any], job: SweepJob):
        with self.lock:
            job.status = JobStatus.PROCESSING
        try:
            result = handler(job.payload)
        except Exception as e:
            logger.warning(f"Sweep job {job.index} failed: {e}")
            with self.lock:
                job.status = JobStatus.FAILED
                job.error = e
            return
        with self.lock:
            job.result = result
            job.status = JobStatus.COMPLETED
