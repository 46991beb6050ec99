import numpy as np
import pytest

from helpers import WALKTHROUGH_REFERENCE_COST
from phasebudget import Objective, PhaseCurve, ValidationError
from phasebudget.estimator import NoiseSpec
from phasebudget.simulator import (
    ExperimentConfig,
    SyntheticPipeline,
    derive_seed,
    hybrid_run,
    nb_reference,
    random_pipeline,
    simulate_run,
    sweep,
)
from phasebudget.strategies import FIXED_AVERAGE_4, StrategySpec, parse_strategy


@pytest.fixture
def pipeline(walkthrough_curves):
    return SyntheticPipeline(tuple(walkthrough_curves), Objective.additive(), WALKTHROUGH_REFERENCE_COST, "apps")


def _config(**kwargs):
    strategies = (parse_strategy("zebra-additive"), StrategySpec.uniform(),
                  StrategySpec.fixed_ratio(FIXED_AVERAGE_4))
    return ExperimentConfig(strategies=strategies, **kwargs)


def test_nb_reference_is_optimum_at_reference_cost(pipeline):
    # the pipeline is nearly saturated at its reference cost
    assert nb_reference(pipeline) == pytest.approx(2.9900201938709623, rel=1e-9)


def test_simulate_run_without_noise_scores_optimum(pipeline):
    record = simulate_run(pipeline, parse_strategy("zebra-additive"), 1.0)
    assert record.retention == pytest.approx(1.0, abs=1e-12)
    assert record.budget_used == pytest.approx(WALKTHROUGH_REFERENCE_COST, rel=1e-9)
    assert record.perceived_value == pytest.approx(record.quality)


def test_simulate_run_with_noise_is_seeded(pipeline):
    spec = parse_strategy("zebra-additive")
    one = simulate_run(pipeline, spec, 0.5, sigma=0.3, seed=4)
    two = simulate_run(pipeline, spec, 0.5, sigma=0.3, seed=4)
    other = simulate_run(pipeline, spec, 0.5, sigma=0.3, seed=5)
    assert one.amounts.tolist() == two.amounts.tolist()
    assert one.amounts.tolist() != other.amounts.tolist()
    assert one.quality <= simulate_run(pipeline, spec, 0.5).quality + 1e-12


def test_derive_seed_depends_on_every_coordinate():
    seeds = {derive_seed([0, 0], *c) for c in [(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]}
    assert len(seeds) == 5
    assert derive_seed([0, 0], 0, 0, 0, 0) != derive_seed([0, 1], 0, 0, 0, 0)
    assert derive_seed([3, 0], 1, 2, 3, 4) == derive_seed([3, 0], 1, 2, 3, 4)


def test_sweep_shape_and_summary(pipeline):
    report = sweep(pipeline, _config(alphas=(0.3, 0.8), runs=3, noise=NoiseSpec(0.1, 2)))
    assert len(report.cells) == 2 * 3
    assert len(report.runs) == 2 * 3 * 3
    cell = report.cell(0.8, "zebra-additive")
    assert cell.n_runs == 3
    assert cell.mean_fractions.sum() == pytest.approx(1.0)
    with pytest.raises(KeyError):
        report.cell(0.5, "uniform")


def test_adding_a_strategy_keeps_other_streams(pipeline):
    noise = NoiseSpec(0.2, 1)
    small = sweep(pipeline, ExperimentConfig((parse_strategy("zebra-additive"),), alphas=(0.5,), runs=4, noise=noise))
    big = sweep(pipeline, _config(alphas=(0.5,), runs=4, noise=noise))
    first = [r.seed for r in small.runs]
    assert first == [r.seed for r in big.runs if r.strategy == "zebra-additive"]


def test_sweep_is_reproducible_and_parallel_safe(pipeline):
    config = _config(alphas=(0.5,), runs=3, noise=NoiseSpec(0.2, 9))
    serial = sweep(pipeline, config)
    assert serial.to_csv() == sweep(pipeline, config).to_csv()
    assert serial.to_json() == sweep(pipeline, config, jobs=2).to_json()


def test_csv_format(pipeline, tmp_path):
    report = sweep(pipeline, _config(alphas=(0.5,), runs=1))
    text = report.to_csv()
    lines = text.split("\r\n")
    assert lines[0].startswith("task,alpha,strategy,run,seed,budget,budget_used,quality,nb_quality")
    assert lines[0].endswith("fraction_refine")
    assert len(lines) == 1 + 3 + 1 and lines[-1] == ""
    json_path, csv_path = report.write(tmp_path / "run")
    assert csv_path.read_bytes() == text.encode()
    assert json_path.exists()


def test_two_retention_definitions_differ_across_tasks(walkthrough_curves):
    strong = SyntheticPipeline(tuple(walkthrough_curves), Objective.additive(), 0.0359, "strong")
    weak_curves = tuple(PhaseCurve(c.ceiling_a * 0.1, c.rate_b, c.label) for c in walkthrough_curves)
    weak = SyntheticPipeline(weak_curves, Objective.additive(), 0.002, "weak")
    report = sweep([strong, weak], ExperimentConfig((StrategySpec.uniform(),), alphas=(0.3,), runs=1))
    cell = report.cells[0]
    by_task = {r.task: r for r in report.runs}
    ratio_of_means = (by_task["strong"].quality + by_task["weak"].quality) / (
        by_task["strong"].nb_quality + by_task["weak"].nb_quality
    )
    mean_of_ratios = np.mean([by_task[t].retention for t in ("strong", "weak")])
    assert cell.retention_ratio_of_means == pytest.approx(ratio_of_means, rel=1e-12)
    assert cell.retention_mean_of_ratios == pytest.approx(mean_of_ratios, rel=1e-12)
    assert cell.retention_ratio_of_means != pytest.approx(cell.retention_mean_of_ratios, rel=1e-3)


def test_mean_of_ratios_skips_negligible_references(walkthrough_curves):
    tiny = tuple(PhaseCurve(0.01, c.rate_b, c.label) for c in walkthrough_curves)
    tasks = [
        SyntheticPipeline(tuple(walkthrough_curves), Objective.additive(), 0.0359, "real"),
        SyntheticPipeline(tiny, Objective.additive(), 1e-4, "tiny"),
    ]
    report = sweep(tasks, ExperimentConfig((StrategySpec.uniform(),), alphas=(0.5,), runs=1))
    real = [r for r in report.runs if r.task == "real"][0]
    assert report.cells[0].retention_mean_of_ratios == pytest.approx(real.retention, rel=1e-12)


def test_experiment_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(())
    with pytest.raises(ValidationError):
        _config(alphas=(0.0,))
    with pytest.raises(ValidationError):
        _config(runs=0)
    with pytest.raises(ValidationError):
        ExperimentConfig((StrategySpec.uniform(), StrategySpec.uniform()))


def test_pipelines_must_share_labels(pipeline):
    other = SyntheticPipeline((PhaseCurve(0.5, 1.0, "x"),), Objective.additive(), 1.0)
    with pytest.raises(ValidationError):
        sweep([pipeline, other], _config(runs=1))


def test_hybrid_exact_spend_reproduces_one_shot(pipeline):
    record = hybrid_run(pipeline, parse_strategy("zebra-additive"), 0.5, split_after=2)
    np.testing.assert_allclose(record.amounts, record.one_shot, atol=1e-9 * record.budget * 10)
    assert record.quality == pytest.approx(record.one_shot_quality, rel=1e-12)


def test_hybrid_underspend_moves_budget_downstream(pipeline):
    record = hybrid_run(pipeline, parse_strategy("zebra-additive"), 0.5, split_after=2, spend_model=0.8)
    assert record.spent == pytest.approx(0.8 * record.one_shot[:2].sum())
    assert np.all(record.amounts[2:] > record.one_shot[2:])
    assert record.amounts.sum() == pytest.approx(record.budget, rel=1e-9)


def test_hybrid_callable_spend_and_validation(pipeline):
    spec = parse_strategy("zebra-mult-offset")
    record = hybrid_run(pipeline, spec, 0.5, 1, spend_model=lambda x: x * 0.5, sigma=0.2, seed=3, renoise=True)
    assert record.amounts.sum() == pytest.approx(record.budget, rel=1e-9)
    with pytest.raises(ValidationError):
        hybrid_run(pipeline, spec, 0.5, 0)
    with pytest.raises(ValidationError):
        hybrid_run(pipeline, StrategySpec.uniform(), 0.5, 1)
    with pytest.raises(ValidationError):
        hybrid_run(pipeline, spec, 0.5, 1, spend_model="guess")


def test_random_pipeline(rng):
    p = random_pipeline(rng, 5, "prop-offset")
    assert len(p.phases) == 5
    assert p.aggregation.weights == tuple(c.ceiling_a for c in p.phases)
    assert random_pipeline(rng, 3, "mult-offset").aggregation.kind.value == "mult-offset"
