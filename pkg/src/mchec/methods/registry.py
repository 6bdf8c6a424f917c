"""Calibration method registry and dispatch."""

from __future__ import annotations

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from mchec.dataset import Dataset
from mchec.errors import MchecError
from mchec.geom import Pose
from mchec.solver import CalibrationResult, SolverOptions

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_DIVERGED = "diverged"


class Estimate(Protocol):
    hand_eye: tuple[Pose, ...]
    board_to_ee: Pose


@dataclass
class Method:
    name: str
    run: Callable[[Dataset, SolverOptions], Estimate]


@dataclass(frozen=True)
class MethodRun:
    name: str
    status: str
    estimate: Estimate | None
    runtime: float  # seconds
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


class MethodRegistry:
    """Holds registered calibration methods and runs them in isolation."""

    def __init__(self) -> None:
        self._methods: dict[str, Method] = {}

    def register(self, method: Method) -> None:
        self._methods[method.name] = method

    def names(self) -> list[str]:
        return list(self._methods)

    def execute(self, name: str, dataset: Dataset, options: SolverOptions) -> MethodRun:
        method = self._methods.get(name)
        if not method:
            return MethodRun(name, STATUS_DIVERGED, None, 0.0, f"unknown method '{name}'")
        started = time.perf_counter()
        try:
            estimate = method.run(dataset, options)
        except (MchecError, np.linalg.LinAlgError, ValueError) as e:
            runtime = time.perf_counter() - started
            logger.warning("%s diverged: %s", name, e)
            return MethodRun(name, STATUS_DIVERGED, None, runtime, str(e))
        runtime = time.perf_counter() - started
        if isinstance(estimate, CalibrationResult) and not estimate.converged:
            return MethodRun(name, STATUS_DIVERGED, estimate, runtime, f"stopped: {estimate.termination_reason}")
        return MethodRun(name, STATUS_OK, estimate, runtime)
