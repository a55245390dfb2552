import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare
from sklearn.base import clone

from morphopt.exceptions import ConfigurationError, EvaluatorError, ProductionStalledError
from morphopt.genetics import Chromosome
from morphopt.geometry import DesignSpace, PanelChainSpec, decode_indices, is_admissible
from morphopt.optimizer import (GaConfig, GeneticShapeOptimizer, Individual, initialize_population,
                                produce_generation, run_campaign, select_elites)
from morphopt.rig import CallableEvaluator, FitnessEvaluator
from morphopt.rig.synthetic import SyntheticDragModel
from morphopt.seeding import make_streams


def surrogate():
    model = SyntheticDragModel().noiseless()
    return CallableEvaluator(lambda s: model.mean_drag(s.theta, 7.33))


def evaluated(indices, fitness):
    return Individual(Chromosome.encode(indices), decode_indices(indices), fitness, 0)


def test_config_invariants():
    with pytest.raises(ConfigurationError):
        GaConfig(elite_count=20)
    with pytest.raises(ConfigurationError):
        GaConfig(generation_size=60)
    with pytest.raises(ConfigurationError):
        GaConfig(mutation_rate=1.2)
    with pytest.raises(ConfigurationError):
        GaConfig(crossover_points=21)
    assert GaConfig().offspring_per_generation == 16


def test_initial_population_default(default_space):
    pop = initialize_population(GaConfig(), default_space, make_streams(7)["init"])
    assert len(pop) == 50
    assert all(not ind.evaluated for ind in pop)
    assert all(is_admissible(ind.shape) for ind in pop)


def test_initial_population_deterministic(default_space):
    a = initialize_population(GaConfig(), default_space, make_streams(7)["init"])
    b = initialize_population(GaConfig(), default_space, make_streams(7)["init"])
    assert a == b


def test_initial_population_dedup(default_space):
    pop = initialize_population(GaConfig(deduplicate=True), default_space, make_streams(1)["init"])
    assert len({ind.chromosome for ind in pop}) == 50


def test_empty_domain_rejected():
    space = DesignSpace(PanelChainSpec(mount_height_above_bed=0.001, min_bed_clearance=0.5))
    assert space.size == 0
    with pytest.raises(ConfigurationError):
        initialize_population(GaConfig(), space, np.random.default_rng())


def test_initial_population_uniform_marginals(default_space):
    n = 100_000
    config = GaConfig(initial_population=n)
    pop = initialize_population(config, default_space, make_streams(11)["init"])
    idx = np.array([ind.shape.indices for ind in pop])
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        exact = default_space.mask.sum(axis=other).astype(float)
        observed = np.bincount(idx[:, axis], minlength=65)
        keep = exact > 0
        expected = exact[keep] / exact.sum() * n
        assert observed[~keep].sum() == 0
        assert chisquare(observed[keep], expected).pvalue > 1e-3


def test_select_elites_sorting():
    pop = [evaluated((i, 0, 0), f) for i, f in enumerate([3.0, 1.0, 2.0, 5.0, 4.0])]
    elites = select_elites(pop, 4)
    assert [e.fitness for e in elites] == [1.0, 2.0, 3.0, 4.0]


def test_select_elites_tie_rule():
    pop = [evaluated((i, 5, 5), 1.0) for i in (9, 3, 7, 1, 5, 2)]
    elites = select_elites(pop, 4)
    expected = sorted(pop, key=lambda ind: ind.chromosome)[:4]
    assert elites == expected


def test_select_elites_errors():
    with pytest.raises(ValueError):
        select_elites([evaluated((0, 0, 0), 1.0)], 4)
    with pytest.raises(ValueError):
        select_elites([Individual.from_indices((0, 0, i)) for i in range(5)], 4)


@given(st.permutations(list(range(12))), st.lists(st.integers(0, 5), min_size=12, max_size=12))
def test_select_elites_permutation_invariant(order, fitness):
    pop = [evaluated((i, 30, 30), float(f)) for i, f in enumerate(fitness)]
    shuffled = [pop[k] for k in order]
    assert select_elites(shuffled, 4) == select_elites(pop, 4)


def _elites(space, seed=0):
    rng = np.random.default_rng(seed)
    rows = space.admissible_indices()[rng.choice(space.size, 4, replace=False)]
    return [evaluated(tuple(r), float(k)) for k, r in enumerate(rows)]


def test_produce_generation_default(default_space):
    elites = _elites(default_space)
    out = produce_generation(elites, GaConfig(), default_space, make_streams(0))
    assert len(out) == 20
    assert out[:4] == elites
    assert all(not ind.evaluated for ind in out[4:])


def test_produce_generation_identity_without_mutation(default_space):
    elite = _elites(default_space)[0]
    out = produce_generation([elite] * 4, GaConfig(mutation_rate=0.0), default_space, make_streams(0))
    assert all(ind.chromosome == elite.chromosome for ind in out)


def test_offspring_always_admissible(default_space):
    config = GaConfig()
    for seed in range(1000):
        streams = make_streams(seed)
        out = produce_generation(_elites(default_space, seed % 50), config, default_space, streams)
        for ind in out[4:]:
            assert ind.shape.indices in default_space
            assert ind.chromosome.genes() == ind.shape.indices


def test_production_stall():
    # a single admissible point and a forced-full mutation: every child is its complement
    space = DesignSpace()
    space.mask = np.zeros_like(space.mask)
    space.mask[10, 10, 10] = True
    elite = evaluated((10, 10, 10), 1.0)
    config = GaConfig(mutation_rate=1.0, retry_cap=50)
    with pytest.raises(ProductionStalledError):
        produce_generation([elite] * 4, config, space, make_streams(0))


def test_max_generations_one(default_space):
    evaluator = surrogate()
    result = run_campaign(GaConfig(max_generations=1), evaluator, default_space)
    assert result.n_generations == 1
    assert evaluator.n_calls == 50
    assert result.best.fitness == min(ind.fitness for ind in result.records[0].population)
    assert result.termination_reason == "max_generations"


def test_campaign_determinism(default_space):
    a = run_campaign(GaConfig(rng_seed=3), surrogate(), default_space)
    b = run_campaign(GaConfig(rng_seed=3), surrogate(), default_space)
    assert [r.population for r in a.records] == [r.population for r in b.records]
    assert [r.rng_digest for r in a.records] == [r.rng_digest for r in b.records]


def test_campaign_invariants(default_space):
    evaluator = surrogate()
    result = run_campaign(GaConfig(rng_seed=5), evaluator, default_space)
    history = result.fitness_history()
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert evaluator.n_calls == result.n_evaluations == 50 + 16 * (result.n_generations - 1)
    for record in result.records:
        assert set(map(id, record.elites)) <= set(map(id, record.population))
        for ind in record.population:
            assert ind.shape.indices in default_space
        assert record.elites == select_elites(record.population, 4)


def test_elites_not_remeasured(default_space):
    result = run_campaign(GaConfig(rng_seed=2, max_generations=4), surrogate(), default_space)
    last = result.records[-1]
    carried = last.population[:4]
    assert carried == result.records[-2].elites
    assert all(ind.evaluated_at < last.index for ind in carried)


def test_remeasure_flag(default_space):
    evaluator = surrogate()
    result = run_campaign(GaConfig(rng_seed=2, max_generations=3, remeasure_elites=True), evaluator,
                          default_space)
    assert evaluator.n_calls == 50 + 20 * 2
    assert all(ind.evaluated_at == 2 for ind in result.records[-1].population)


def test_stall_rule_fires_after_exactly_five(default_space):
    result = run_campaign(GaConfig(rng_seed=0), surrogate(), default_space)
    assert result.termination_reason == "converged"
    sets = [r.elite_set() for r in result.records]
    # the final elite set first appeared at generation g and was repeated five times after it
    g = next(i for i in range(len(sets)) if all(s == sets[-1] for s in sets[i:]))
    assert len(sets) - 1 - g == 5
    assert sets[g - 1] != sets[g]


def test_constant_objective_stalls_immediately(default_space):
    # with constant fitness the tie rule decides, so elites only change when
    # crossover happens to make a lexicographically smaller chromosome
    evaluator = CallableEvaluator(lambda s: 1.0)
    result = run_campaign(GaConfig(rng_seed=0, mutation_rate=0.0), evaluator, default_space)
    assert result.termination_reason == "converged"
    sets = [r.elite_set() for r in result.records]
    assert all(s == sets[-1] for s in sets[-6:])
    assert result.n_generations < 20


class Flaky(FitnessEvaluator):
    def __init__(self, fail_at):
        self.fail_at = fail_at
        self.calls = 0

    def evaluate(self, shape):
        self.calls += 1
        if self.calls > self.fail_at:
            raise ConnectionError("tunnel offline")
        return float(sum(shape.theta))


def test_evaluator_failure_keeps_partial_records(default_space):
    with pytest.raises(EvaluatorError) as err:
        run_campaign(GaConfig(), Flaky(50 + 16 * 2 + 3), default_space)
    partial = err.value.partial
    assert partial.n_generations == 3
    assert partial.termination_reason == "evaluator_failure"


def test_estimator_api(default_space):
    est = GeneticShapeOptimizer(random_state=4, max_generations=3)
    params = est.get_params()
    assert params["random_state"] == 4 and params["gene_coding"] == "gray"
    again = clone(est)
    assert again.get_params() == params
    est.fit(surrogate(), domain=default_space)
    assert est.n_generations_ == 3
    assert est.best_fitness_ == est.history_[-1].best.fitness
    assert GeneticShapeOptimizer.from_config(est.to_config()).get_params() == params
    with pytest.raises(TypeError):
        est.fit(np.zeros((3, 3)))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_every_campaign_individual_admissible(seed):
    space = DesignSpace()
    result = run_campaign(GaConfig(rng_seed=seed, max_generations=6), surrogate(), space)
    for record in result.records:
        assert all(ind.shape.indices in space for ind in record.population)
