"""Forward-pass latency measurement."""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import dsp
from .errors import InvalidArgument
from .network import TdnnModel, forward


@dataclass
class BenchResult:
    name: str
    n_utterances: int
    frames_per_utterance: float
    mean_ms: float
    std_ms: float
    throughput: float  # frames per second
    times_ms: list[float] = field(default_factory=list, repr=False)
    rep_totals_ms: list[float] = field(default_factory=list, repr=False)

    @property
    def rep_cv(self) -> float:
        """Coefficient of variation of the per-repetition totals."""
        return statistics.pstdev(self.rep_totals_ms) / statistics.fmean(self.rep_totals_ms)


def bench_forward(
    model: TdnnModel,
    utterances,
    warmup: int = 1,
    reps: int = 5,
    name: str = "model",
    threads: int = 1,
) -> BenchResult:
    """Time ``forward`` on every utterance, ``reps`` times after ``warmup`` passes.

    ``mean_ms`` is the mean over all recorded per-utterance forward times.
    Every measured output is compared bit-for-bit with the warmup output.
    """
    utterances = list(utterances)
    if not utterances:
        raise InvalidArgument("benchmark needs at least one utterance")
    if reps < 3:
        raise InvalidArgument(f"reps must be >= 3, got {reps}")
    if warmup < 1:
        raise InvalidArgument(f"warmup must be >= 1, got {warmup}")

    with threadpool_limits(limits=threads):
        reference = None
        for _ in range(warmup):
            reference = [forward(model, u) for u in utterances]

        times, totals = [], []
        for _ in range(reps):
            total = 0.0
            for u, expected in zip(utterances, reference):
                tic = time.perf_counter_ns()
                out = forward(model, u)
                elapsed = (time.perf_counter_ns() - tic) / 1e6
                if not np.array_equal(out, expected):
                    raise RuntimeError(f"{name}: forward output changed between passes")
                times.append(elapsed)
                total += elapsed
            totals.append(total)

    frames = sum(u.shape[0] for u in utterances)
    mean_ms = statistics.fmean(times)
    return BenchResult(
        name=name,
        n_utterances=len(utterances),
        frames_per_utterance=frames / len(utterances),
        mean_ms=mean_ms,
        std_ms=statistics.pstdev(times),
        throughput=frames * reps / (sum(times) / 1e3),
        times_ms=times,
        rep_totals_ms=totals,
    )


def bench_parallel(model: TdnnModel, utterances, workers: int = 2, reps: int = 3) -> float:
    """Wall-clock ms per utterance when utterances are spread over a thread pool."""
    utterances = list(utterances)
    if not utterances:
        raise InvalidArgument("benchmark needs at least one utterance")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda u: forward(model, u), utterances))
        tic = time.perf_counter()
        for _ in range(reps):
            list(pool.map(lambda u: forward(model, u), utterances))
        elapsed = time.perf_counter() - tic
    return elapsed * 1e3 / (reps * len(utterances))


def stft_cost_ms(waves, reps: int = 3) -> float:
    """Mean ms per utterance spent in STFT + magnitude (informational)."""
    waves = list(waves)
    tic = time.perf_counter()
    for _ in range(reps):
        for w in waves:
            dsp.magnitude(dsp.stft(w))
    return (time.perf_counter() - tic) * 1e3 / (reps * len(waves))


def format_results(results, baseline: str | None = None) -> str:
    lines = ["config\tutterances\tframes_per_utt\tmean_ms\tstd_ms\tframes_per_s\tratio"]
    base = next((r for r in results if r.name == baseline), results[0] if results else None)
    for r in results:
        ratio = r.mean_ms / base.mean_ms
        lines.append(
            f"{r.name}\t{r.n_utterances}\t{r.frames_per_utterance:.1f}\t{r.mean_ms:.3f}"
            f"\t{r.std_ms:.3f}\t{r.throughput:.1f}\t{ratio:.3f}"
        )
    return "\n".join(lines) + "\n"
