import math
from multiprocessing import Pool
from typing import Iterable

import numpy as np

from api.v1.exceptions.montecarlo import InsufficientSurvivorsException, PopulationCapExceededException
from api.v1.schemas.asymptotics import ProcessParams
from api.v1.schemas.montecarlo import KTracePoint, SimConfig, SimEstimate
from api.v1.schemas.offspring import OffspringLaw
from api.v1.services.iterate import gap_map
from api.v1.services.offspring import harris_sevastyanov, masses
from core.config import get_settings
from core.logging import get_logger

logger = get_logger(__name__)

_NORMAL_95 = 1.959963984540054


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Counter-based substream keyed by (seed, block)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def run_block(args: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Evolve one block of replicates for n generations. Returns the final
    population sizes, the extinction generation (0 while alive) and the
    flagged mask for replicates that outgrew the population cap.
    """
    pmf, n, seed, block, size, population_cap = args
    generator = block_generator(seed, block)
    offspring = np.arange(pmf.size)
    population = np.ones(size, dtype=np.int64)
    extinction = np.zeros(size, dtype=np.int64)
    flagged = np.zeros(size, dtype=bool)
    for generation in range(1, n + 1):
        active = (population > 0) & ~flagged
        if not active.any():
            break
        counts = generator.multinomial(population[active], pmf)
        population[active] = counts @ offspring
        died = active & (population == 0)
        extinction[died] = generation
        over = active & (population > population_cap)
        flagged |= over
    return population, extinction, flagged


def _blocks(cfg: SimConfig, pmf: np.ndarray, block_size: int) -> list[tuple]:
    count = math.ceil(cfg.replicates / block_size)
    return [
        (pmf, cfg.n, cfg.seed, block, min(block_size, cfg.replicates - block * block_size), cfg.population_cap)
        for block in range(count)
    ]


def simulate(law: OffspringLaw, cfg: SimConfig, workers: int | None = None) -> SimEstimate:
    """
    Direct simulation of Z(0..n) with Z(0) = 1. One generation of Z individuals
    is a multinomial count vector over the offspring masses. Blocks are reduced
    in index order, so estimates do not depend on the worker count.
    """
    settings = get_settings().simulation_settings
    workers = settings.WORKERS if workers is None else workers
    pmf = np.asarray(masses(law), dtype=np.float64)
    tasks = _blocks(cfg, pmf, settings.BLOCK_SIZE)
    logger.info(f"Simulating {cfg.replicates} replicates to n={cfg.n} in {len(tasks)} blocks on {workers} workers")

    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            results = pool.map(run_block, tasks)
    else:
        results = [run_block(task) for task in tasks]

    population = np.concatenate([result[0] for result in results])
    extinction = np.concatenate([result[1] for result in results])
    flagged = np.concatenate([result[2] for result in results])

    flagged_count = int(flagged.sum())
    if flagged_count > settings.FLAGGED_FRACTION_LIMIT * cfg.replicates:
        logger.error(f"{flagged_count} of {cfg.replicates} replicates exceeded the population cap")
        raise PopulationCapExceededException(
            f"{flagged_count} of {cfg.replicates} replicates exceeded the population cap {cfg.population_cap}."
        )
    if flagged_count:
        logger.warning(f"Excluding {flagged_count} replicates above the population cap")

    kept = ~flagged
    effective = int(kept.sum())
    alive = kept & (population > 0)
    survivors = int(alive.sum())
    survival = survivors / effective
    survival_stderr = math.sqrt(survival * (1.0 - survival) / effective)

    conditional_mean = None
    conditional_stderr = None
    if survivors:
        sizes = population[alive].astype(np.float64)
        conditional_mean = float(sizes.mean())
        conditional_stderr = float(sizes.std(ddof=1) / math.sqrt(survivors)) if survivors > 1 else 0.0

    histogram = np.bincount(extinction[kept & (population == 0)], minlength=cfg.n + 1)[: cfg.n + 1]
    return SimEstimate(
        n=cfg.n,
        replicates=cfg.replicates,
        seed=cfg.seed,
        survival_hat=survival,
        survival_stderr=survival_stderr,
        conditional_mean_hat=conditional_mean,
        conditional_mean_stderr=conditional_stderr,
        survivors=survivors,
        flagged=flagged_count,
        extinction_time_histogram=histogram.tolist(),
        censored=survivors,
    )


def conditional_on_extinction(
    law: OffspringLaw,
    params: ProcessParams,
    cfg: SimConfig,
    workers: int | None = None,
) -> SimEstimate:
    """The process given eventual extinction, simulated as the Harris-Sevastyanov dual."""
    return simulate(harris_sevastyanov(law, params.q), cfg, workers)


def exact_survival(law: OffspringLaw, n: int, q: float = 1.0) -> float:
    """P(Z(n) > 0 | H < infinity) = R_n(0)/q, exact up to rounding."""
    step = gap_map(law, q)
    gap = q
    for _ in range(n):
        gap = step(gap)
    return gap / q


def k_from_simulation(
    law: OffspringLaw,
    params: ProcessParams,
    horizons: Iterable[int],
    replicates: int,
    seed: int,
    workers: int | None = None,
) -> list[KTracePoint]:
    """
    beta^n / Q_hat_dual(n) and the conditional mean of the dual process at each
    horizon, with delta-method 95% intervals and the exact ratio from iteration.
    """
    min_survivors = get_settings().simulation_settings.MIN_SURVIVORS
    dual = harris_sevastyanov(law, params.q)
    trace = []
    for n in horizons:
        exact = exact_survival(dual, n)
        if exact * replicates < min_survivors:
            logger.error(f"Horizon n={n} expects {exact * replicates:.1f} survivors")
            raise InsufficientSurvivorsException(
                f"Horizon n={n} expects {exact * replicates:.1f} survivors out of {replicates}; "
                f"at least {min_survivors} are needed."
            )
        estimate = simulate(dual, SimConfig(n=n, replicates=replicates, seed=seed), workers)
        beta_n = params.beta**n
        if estimate.survival_hat == 0.0:
            raise InsufficientSurvivorsException(f"No replicate survived to n={n}.")
        ratio = beta_n / estimate.survival_hat
        spread = _NORMAL_95 * ratio * estimate.survival_stderr / estimate.survival_hat
        trace.append(
            KTracePoint(
                n=n,
                ratio=ratio,
                ratio_ci_low=ratio - spread,
                ratio_ci_high=ratio + spread,
                conditional_mean=estimate.conditional_mean_hat,
                conditional_mean_stderr=estimate.conditional_mean_stderr,
                exact_ratio=beta_n / exact,
            )
        )
        logger.debug(f"n={n}: ratio {ratio!r} against exact {beta_n / exact!r}")
    return trace
