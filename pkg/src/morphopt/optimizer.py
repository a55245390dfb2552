"""Elitist single-objective genetic algorithm over binary chromosomes."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError, EvaluatorError, ProductionStalledError
from .genetics import CHROMOSOME_LENGTH, GENE_CODINGS, Chromosome, crossover, mutate
from .geometry import DesignSpace, MorphShape, PanelChainSpec, decode_indices
from .rig.base import FitnessEvaluator
from .seeding import make_streams, state_digest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaConfig:
    initial_population: int = 50
    generation_size: int = 20
    elite_count: int = 4
    crossover_points: int = 4
    mutation_rate: float = 0.05
    stall_generations: int = 5
    max_generations: int = 50
    rng_seed: int = 0
    remeasure_elites: bool = False
    deduplicate: bool = False
    retry_cap: int = 1000
    gene_coding: str = "gray"

    def __post_init__(self):
        if self.gene_coding not in GENE_CODINGS:
            raise ConfigurationError(f"gene_coding must be one of {GENE_CODINGS}")
        if not 0 < self.elite_count < self.generation_size <= self.initial_population:
            raise ConfigurationError("require 0 < elite_count < generation_size <= initial_population")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigurationError("mutation_rate must be in [0, 1]")
        if not 0 <= self.crossover_points < CHROMOSOME_LENGTH:
            raise ConfigurationError(f"crossover_points must be < {CHROMOSOME_LENGTH}")
        if self.elite_count % 2:
            raise ConfigurationError("elite_count must be even so elites pair up")
        if self.stall_generations < 1 or self.max_generations < 1 or self.retry_cap < 1:
            raise ConfigurationError("stall_generations, max_generations and retry_cap must be >= 1")

    @property
    def offspring_per_generation(self) -> int:
        return self.generation_size - self.elite_count


@dataclass(frozen=True)
class Individual:
    chromosome: Chromosome
    shape: MorphShape
    fitness: float | None = None
    evaluated_at: int | None = None

    @classmethod
    def from_indices(cls, indices, coding: str = "gray") -> "Individual":
        shape = decode_indices(indices)
        return cls(Chromosome.encode(shape.indices, coding), shape)

    @classmethod
    def from_chromosome(cls, chromosome: Chromosome, coding: str = "gray") -> "Individual":
        return cls(chromosome, decode_indices(chromosome.genes(coding)))

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


@dataclass
class GenerationRecord:
    index: int
    population: list[Individual]
    elites: list[Individual]
    rng_digest: str
    n_evaluated: int = 0

    @property
    def best(self) -> Individual:
        return self.elites[0]

    def elite_set(self) -> frozenset[Chromosome]:
        return frozenset(ind.chromosome for ind in self.elites)


@dataclass
class CampaignResult:
    records: list[GenerationRecord] = field(default_factory=list)
    termination_reason: str = "incomplete"
    config: GaConfig | None = None

    @property
    def best(self) -> Individual:
        return self.records[-1].best

    @property
    def n_generations(self) -> int:
        return len(self.records)

    @property
    def n_evaluations(self) -> int:
        return sum(r.n_evaluated for r in self.records)

    def fitness_history(self) -> list[float]:
        return [r.best.fitness for r in self.records]


def initialize_population(config: GaConfig, domain: DesignSpace,
                          rng: np.random.Generator) -> list[Individual]:
    """Uniform draws over the feasible domain, by rejection from the full grid."""
    if domain.size == 0:
        raise ConfigurationError("feasible domain is empty")
    population: list[Individual] = []
    seen: set[tuple[int, int, int]] = set()
    while len(population) < config.initial_population:
        indices = tuple(int(i) for i in rng.integers(0, 65, size=3))
        if indices not in domain:
            continue
        if config.deduplicate:
            if indices in seen:
                continue
            seen.add(indices)
        population.append(Individual.from_indices(indices, config.gene_coding))
    return population


def select_elites(population: Sequence[Individual], elite_count: int) -> list[Individual]:
    """Lowest-fitness members, ascending, ties broken by chromosome order."""
    if len(population) < elite_count:
        raise ValueError(f"population of {len(population)} is smaller than elite_count={elite_count}")
    if any(not ind.evaluated for ind in population):
        raise ValueError("all individuals must be evaluated before selection")
    return sorted(population, key=lambda ind: (ind.fitness, ind.chromosome))[:elite_count]


def produce_generation(elites: Sequence[Individual], config: GaConfig, domain: DesignSpace,
                       streams: dict[str, np.random.Generator]) -> list[Individual]:
    """Elites plus admissible offspring until the generation is full.

    Elites are shuffled into disjoint pairs for each batch; every pair yields
    one child by crossover then mutation, and inadmissible children are
    discarded.
    """
    elites = list(elites)
    if len(elites) != config.elite_count:
        raise ValueError(f"expected {config.elite_count} elites, got {len(elites)}")
    offspring: list[Individual] = []
    seen = {ind.chromosome for ind in elites}
    failures = 0
    while len(offspring) < config.offspring_per_generation:
        order = streams["pairing"].permutation(len(elites))
        for k in range(0, len(order), 2):
            if len(offspring) >= config.offspring_per_generation:
                break
            a, b = elites[order[k]], elites[order[k + 1]]
            child = crossover(a.chromosome, b.chromosome, streams["crossover"], config.crossover_points)
            child = mutate(child, config.mutation_rate, streams["mutation"])
            admissible = child.on_grid(config.gene_coding) and child.genes(config.gene_coding) in domain
            if admissible and config.deduplicate and child in seen:
                admissible = False
            if not admissible:
                failures += 1
                if failures > config.retry_cap:
                    raise ProductionStalledError(
                        f"more than {config.retry_cap} rejected offspring while filling slot {len(offspring) + 1}")
                continue
            failures = 0
            seen.add(child)
            offspring.append(Individual.from_chromosome(child, config.gene_coding))
    return elites + offspring


def _measure(population: list[Individual], evaluator: FitnessEvaluator, generation: int,
             remeasure: bool) -> tuple[list[Individual], int]:
    pending = [i for i, ind in enumerate(population) if remeasure or not ind.evaluated]
    values = evaluator.evaluate_many([population[i].shape for i in pending])
    if len(values) != len(pending):
        raise EvaluatorError(f"evaluator returned {len(values)} values for {len(pending)} shapes")
    out = list(population)
    for i, value in zip(pending, values):
        out[i] = replace(out[i], fitness=float(value), evaluated_at=generation)
    return out, len(pending)


def run_campaign(config: GaConfig, evaluator: FitnessEvaluator, domain: DesignSpace | None = None,
                 on_generation: Callable[[GenerationRecord], None] | None = None) -> CampaignResult:
    """Evaluate, select and produce until the elite set stalls or the generation cap is hit.

    Raises :class:`EvaluatorError` on rig failure, with the records gathered so
    far attached as ``error.partial``.
    """
    domain = domain or DesignSpace()
    streams = make_streams(config.rng_seed)
    result = CampaignResult(config=config)
    population = initialize_population(config, domain, streams["init"])
    stall = 0
    previous: frozenset[Chromosome] | None = None
    for gen in range(config.max_generations):
        if gen > 0:
            population = produce_generation(result.records[-1].elites, config, domain, streams)
        try:
            evaluator.begin_generation(gen)
            population, n_eval = _measure(population, evaluator, gen,
                                          config.remeasure_elites and gen > 0)
        except Exception as exc:
            result.termination_reason = "evaluator_failure"
            error = exc if isinstance(exc, EvaluatorError) else EvaluatorError(str(exc))
            error.partial = result
            raise error from exc
        elites = select_elites(population, config.elite_count)
        record = GenerationRecord(gen, population, elites, state_digest(*streams.values()), n_eval)
        result.records.append(record)
        if on_generation is not None:
            on_generation(record)
        logger.debug("generation %d best %.6f", gen, elites[0].fitness)
        current = record.elite_set()
        if previous is not None:
            stall = stall + 1 if current == previous else 0
        previous = current
        if stall >= config.stall_generations:
            result.termination_reason = "converged"
            return result
    result.termination_reason = "max_generations"
    return result


class GeneticShapeOptimizer(BaseEstimator):
    """Estimator-style front end to :func:`run_campaign`.

    ``fit`` takes a fitness evaluator in place of training data; all GA
    settings are constructor parameters so ``get_params``/``set_params`` and
    ``sklearn.base.clone`` work as usual.

    Attributes
    ----------
    best_shape_ : MorphShape
    best_fitness_ : float
    history_ : list of GenerationRecord
    n_generations_ : int
    n_evaluations_ : int
    termination_reason_ : str
    """

    def __init__(self, initial_population=50, generation_size=20, elite_count=4, crossover_points=4,
                 mutation_rate=0.05, stall_generations=5, max_generations=50, random_state=0,
                 remeasure_elites=False, deduplicate=False, retry_cap=1000, gene_coding="gray",
                 chain_spec=None):
        self.initial_population = initial_population
        self.generation_size = generation_size
        self.elite_count = elite_count
        self.crossover_points = crossover_points
        self.mutation_rate = mutation_rate
        self.stall_generations = stall_generations
        self.max_generations = max_generations
        self.random_state = random_state
        self.remeasure_elites = remeasure_elites
        self.deduplicate = deduplicate
        self.retry_cap = retry_cap
        self.gene_coding = gene_coding
        self.chain_spec = chain_spec

    def to_config(self) -> GaConfig:
        params = self.get_params()
        params.pop("chain_spec")
        params["rng_seed"] = params.pop("random_state")
        return GaConfig(**params)

    @classmethod
    def from_config(cls, config: GaConfig, chain_spec: PanelChainSpec | None = None) -> "GeneticShapeOptimizer":
        params = asdict(config)
        params["random_state"] = params.pop("rng_seed")
        return cls(chain_spec=chain_spec, **params)

    def fit(self, evaluator, y=None, domain: DesignSpace | None = None, on_generation=None):
        if not isinstance(evaluator, FitnessEvaluator):
            raise TypeError("fit expects a FitnessEvaluator")
        config = self.to_config()
        domain = domain or DesignSpace(self.chain_spec)
        self.result_ = run_campaign(config, evaluator, domain, on_generation)
        best = self.result_.best
        self.best_individual_ = best
        self.best_shape_ = best.shape
        self.best_fitness_ = best.fitness
        self.history_ = self.result_.records
        self.n_generations_ = self.result_.n_generations
        self.n_evaluations_ = self.result_.n_evaluations
        self.termination_reason_ = self.result_.termination_reason
        return self
