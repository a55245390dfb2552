"""Fitness-rig interface used by the optimizer."""

from __future__ import annotations

import abc
from typing import Sequence

from ..geometry import MorphShape


class FitnessEvaluator(abc.ABC):
    """Anything that can score a shape by a (possibly noisy) mean drag value.

    Subclasses implement :meth:`evaluate`. The optimizer calls
    :meth:`begin_generation` before measuring each generation and
    :meth:`evaluate_many` for the generation's unevaluated shapes, which must
    return fitness values in input order.
    """

    #: Whether a generation's shapes may be measured concurrently.
    supports_concurrent: bool = False

    def begin_generation(self, index: int) -> None:
        """Hook run before a generation is measured (recalibration, logging)."""

    @abc.abstractmethod
    def evaluate(self, shape: MorphShape) -> float:
        """Mean drag (or drag change) in newtons for one shape."""

    def evaluate_many(self, shapes: Sequence[MorphShape]) -> list[float]:
        return [self.evaluate(shape) for shape in shapes]


class CallableEvaluator(FitnessEvaluator):
    """Wrap a plain ``f(shape) -> float`` objective."""

    supports_concurrent = True

    def __init__(self, func):
        self.func = func
        self.n_calls = 0

    def evaluate(self, shape: MorphShape) -> float:
        self.n_calls += 1
        return float(self.func(shape))
