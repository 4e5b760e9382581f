import multiprocessing
import time
from pathlib import Path
from typing import Any, Callable, Sequence

from .Logger import Logger


class CommandExecutor:
    """
    Runs independent jobs of a workflow, such as training one agent or evaluating
    one agent under an attack, either in-process or in a pool of worker processes.

    Results always come back in submission order, so the number of workers never
    changes what a workflow writes.
    """

    def __init__(self, workflow_dir: Path, logger: Logger):
        self.workflow_dir = Path(workflow_dir)
        self.logger = logger

    def run_multiple_jobs(self, fn: Callable[[Any], Any], jobs: Sequence[Any], workers: int = 1) -> list:
        """
        Executes a function on every job, in parallel if more than one worker is requested.

        Args:
            fn (Callable): A module level (picklable) function taking one job.
            jobs (Sequence): The jobs, each passed to fn as its only argument.
            workers (int): Number of worker processes; 1 runs everything in-process.

        Returns:
            list: fn(job) for every job, in the order of jobs.
        """
        if workers < 1:
            raise ValueError(f"Number of workers must be at least 1, got {workers}.")
        jobs = list(jobs)
        workers = min(workers, len(jobs)) or 1
        self.logger.log(f"Running {len(jobs)} jobs with {workers} worker(s)...", 1)
        start_time = time.time()
        if workers == 1:
            results = [self.run_job(fn, job) for job in jobs]
        else:
            with multiprocessing.Pool(workers) as pool:
                results = pool.map(fn, jobs)
        self.logger.log(f"Total time to run {len(jobs)} jobs: {time.time() - start_time:.2f} seconds", 1)
        return results

    def run_job(self, fn: Callable[[Any], Any], job: Any) -> Any:
        """Runs a single job in-process and logs its run time."""
        start_time = time.time()
        result = fn(job)
        self.logger.log(f"Job {getattr(fn, '__name__', fn)} finished in {time.time() - start_time:.2f} seconds", 2)
        return result
