"""The five compared methods: the joint solver, its two ablations and the closed-form baselines."""

from __future__ import annotations

from dataclasses import replace

from mchec.dataset import Dataset
from mchec.initest import BaselineResult, solve_baseline
from mchec.methods.registry import Method, MethodRegistry
from mchec.solver import CalibrationResult, SolverOptions, calibrate


def _joint(**overrides: bool):
    def run(dataset: Dataset, options: SolverOptions) -> CalibrationResult:
        return calibrate(dataset, replace(options, **overrides))

    return run


def _baseline(name: str):
    def run(dataset: Dataset, options: SolverOptions) -> BaselineResult:
        return solve_baseline(dataset, name)

    return run


# shared Z and cross term
ours = Method(name="ours", run=_joint(cross_term_enabled=True, shared_z_enabled=True))

ours_no_cross = Method(name="ours-no-cross", run=_joint(cross_term_enabled=False, shared_z_enabled=True))

ours_independent_z = Method(name="ours-independent-Z", run=_joint(cross_term_enabled=True, shared_z_enabled=False))

tsai = Method(name="tsai", run=_baseline("tsai"))

park = Method(name="park", run=_baseline("park"))


def default_registry() -> MethodRegistry:
    registry = MethodRegistry()
    for method in (ours, ours_no_cross, ours_independent_z, tsai, park):
        registry.register(method)
    return registry
