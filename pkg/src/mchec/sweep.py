"""Seeded comparison sweeps over freshly generated synthetic workcells."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import replace

from mchec.metrics import ComparisonTable, SweepSummary, compare_methods, summarize_sweep
from mchec.solver import SolverOptions
from mchec.synthgen import SynthConfig, generate

logger = logging.getLogger(__name__)


def run_seed(config: SynthConfig, seed: int, options: SolverOptions | None = None) -> ComparisonTable:
    output = generate(replace(config, seed=seed))
    return compare_methods(output.dataset, output.truth, options)


def seed_sweep(
    config: SynthConfig, seeds: Iterable[int], options: SolverOptions | None = None
) -> tuple[SweepSummary, list[ComparisonTable]]:
    """compare_methods on one workcell per seed, summarized by per-method medians."""
    seeds = list(seeds)
    tables = []
    for seed in seeds:
        logger.info("seed %d", seed)
        tables.append(run_seed(config, seed, options))
    return summarize_sweep(seeds, tables), tables
