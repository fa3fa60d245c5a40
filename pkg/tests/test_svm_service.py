import json

import numpy as np
import pytest

from src.errors import ConfigurationError, CoverageError, DegenerateProblemError, DimensionError
from src.models.kernel import Kernel
from src.models.sample import ActivityLabel, Partition
from src.models.svm import BinarySvm, MulticlassSvm, PairMachine, SmoConfig
from src.services.svm_service import KernelRowCache, dual_objective, svm_service
from src.utils.numeric import kernel_matrix
from tests.conftest import make_blobs
from tests.oracles import dual_qp, naive_kernel

TWO_POINTS = np.array([[0.0, 0.0], [2.0, 2.0]])
TWO_TARGETS = np.array([-1, 1])


def _random_problem(rng, size, dimension=2):
    features = rng.uniform(-1, 1, (size, dimension))
    targets = rng.choice([-1, 1], size)
    targets[:2] = [-1, 1]
    return features, targets


def _constant_machine(class_a, class_b, value):
    model = BinarySvm(kernel=Kernel.linear(), C=1.0, support_vectors=np.zeros((0, 2)),
                      support_labels=np.zeros(0, dtype=np.int64), support_indices=np.zeros(0, dtype=np.int64),
                      alphas=np.zeros(0), bias=value)
    return PairMachine(class_a=class_a, class_b=class_b, model=model)


def _ensemble(d12, d13, d23):
    machines = [_constant_machine(1, 2, d12), _constant_machine(1, 3, d13), _constant_machine(2, 3, d23)]
    return MulticlassSvm(kernel=Kernel.linear(), config=SmoConfig(), machines=machines)


def test_two_point_analytic_solution():
    model = svm_service.smo_train(TWO_POINTS, TWO_TARGETS, Kernel.linear(), SmoConfig(C=0.5))
    np.testing.assert_allclose(model.alphas, [0.25, 0.25], atol=1e-12)
    assert model.bias == pytest.approx(-1.0, abs=1e-12)
    assert model.converged
    assert svm_service.decision(model, [2, 2]) == pytest.approx(1.0, abs=1e-12)
    assert svm_service.decision(model, [1, 1]) == pytest.approx(0.0, abs=1e-12)
    assert svm_service.decision(model, [0, 0]) == pytest.approx(-1.0, abs=1e-12)
    assert svm_service.kkt_report(model, TWO_POINTS, TWO_TARGETS) == pytest.approx(0.0, abs=1e-9)
    assert model.dual_objective == pytest.approx(0.25, abs=1e-12)


def test_xor_puts_every_multiplier_at_the_bound():
    features = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    targets = np.array([-1, -1, 1, 1])
    model = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=0.5))
    assert sorted(model.support_indices.tolist()) == [0, 1, 2, 3]
    np.testing.assert_allclose(model.alphas, 0.5, atol=1e-2)
    _, expected = dual_qp(kernel_matrix(Kernel.linear(), features, features), targets, 0.5)
    assert model.dual_objective == pytest.approx(expected, rel=1e-3)


def test_separable_points_with_large_C(rng):
    features = rng.uniform(-1, 1, (200, 2))
    margin = features.sum(axis=1)
    features = features[np.abs(margin) > 0.3][:40]
    targets = np.where(features.sum(axis=1) > 0, 1, -1)
    model = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=100.0))
    assert (np.sign(svm_service.decision_batch(model, features)) == targets).all()
    _, expected = dual_qp(kernel_matrix(Kernel.linear(), features, features), targets, 100.0)
    assert model.dual_objective == pytest.approx(expected, rel=1e-3)


@pytest.mark.parametrize('kernel', [Kernel.linear(), Kernel.polynomial(gamma=0.5, coef0=1.0, degree=2)],
                         ids=lambda k: k.tag)
@pytest.mark.parametrize('size', [4, 8, 12])
def test_small_instances_match_qp_oracle(kernel, size, rng):
    for _ in range(3):
        features, targets = _random_problem(rng, size)
        model = svm_service.smo_train(features, targets, kernel, SmoConfig(C=1.0))
        _, expected = dual_qp(kernel_matrix(kernel, features, features), targets, 1.0)
        assert model.dual_objective == pytest.approx(expected, rel=1e-3)
        assert model.converged
        assert svm_service.kkt_report(model, features, targets) <= 1e-3


def test_reported_objective_agrees_with_gram_form(rng):
    features, targets = _random_problem(rng, 10)
    kernel = Kernel.polynomial(gamma=0.7, coef0=0.5, degree=3)
    model = svm_service.smo_train(features, targets, kernel, SmoConfig(C=2.0))
    alphas = np.zeros(10)
    alphas[model.support_indices] = model.alphas
    gram = kernel_matrix(kernel, features, features)
    assert model.dual_objective == pytest.approx(dual_objective(alphas, targets, gram), rel=1e-7)


def test_dual_feasibility(rng):
    features, targets = _random_problem(rng, 30, dimension=4)
    config = SmoConfig(C=0.5)
    model = svm_service.smo_train(features, targets, Kernel.linear(), config)
    assert ((model.alphas > config.alpha_change_epsilon) & (model.alphas <= config.C)).all()
    assert abs(float(model.alphas @ model.support_labels)) <= 1e-8 * (float(model.alphas.sum()) + 1.0)
    np.testing.assert_array_equal(model.support_labels, targets[model.support_indices])
    np.testing.assert_array_equal(model.support_vectors, features[model.support_indices])


@pytest.mark.parametrize('kernel', [Kernel.linear(), Kernel.sigmoid(gamma=0.5, coef0=-0.2)], ids=lambda k: k.tag)
def test_objective_never_decreases(kernel, rng):
    features, targets = _random_problem(rng, 25, dimension=3)
    model = svm_service.smo_train(features, targets, kernel, SmoConfig(C=0.5, max_iterations=5000),
                                  record_objective=True)
    trace = np.asarray(model.objective_trace)
    assert trace.size == model.iterations + 1
    assert (np.diff(trace) >= -1e-9).all()


def test_negating_labels_negates_the_decision(rng):
    features, targets = _random_problem(rng, 20, dimension=3)
    kernel = Kernel.polynomial(gamma=0.5, coef0=1.0, degree=2)
    positive = svm_service.smo_train(features, targets, kernel, SmoConfig(C=0.5))
    negative = svm_service.smo_train(features, -targets, kernel, SmoConfig(C=0.5))
    queries = rng.uniform(-1, 1, (15, 3))
    np.testing.assert_allclose(svm_service.decision_batch(negative, queries),
                               -svm_service.decision_batch(positive, queries), atol=1e-6)


def test_truncated_run_is_flagged(rng):
    features, targets = _random_problem(rng, 12)
    with pytest.warns(RuntimeWarning, match='KKT violation'):
        model = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=1.0, max_iterations=1))
    assert model.iterations == 1
    assert not model.converged
    assert model.max_kkt_violation > 1e-3
    assert svm_service.kkt_report(model, features, targets) == pytest.approx(model.max_kkt_violation)


def test_degenerate_problems():
    with pytest.raises(DegenerateProblemError):
        svm_service.smo_train([[0.0, 1.0]], [1], Kernel.linear(), SmoConfig())
    with pytest.raises(DegenerateProblemError):
        svm_service.smo_train(TWO_POINTS, [1, 1], Kernel.linear(), SmoConfig())
    with pytest.raises(DegenerateProblemError):
        svm_service.smo_train(TWO_POINTS, [0, 1], Kernel.linear(), SmoConfig())
    with pytest.raises(DimensionError):
        svm_service.smo_train(TWO_POINTS, [-1, 1, 1], Kernel.linear(), SmoConfig())


def test_decision_matches_direct_summation(rng):
    kernel = Kernel.polynomial(gamma=0.4, coef0=0.3, degree=3)
    vectors = rng.uniform(-1, 1, (7, 5))
    labels = rng.choice([-1, 1], 7)
    alphas = rng.uniform(0.01, 1.0, 7)
    model = BinarySvm(kernel=kernel, C=1.0, support_vectors=vectors, support_labels=labels,
                      support_indices=np.arange(7), alphas=alphas, bias=0.125)
    for x in rng.uniform(-1, 1, (10, 5)):
        expected = 0.125 + sum(a * y * naive_kernel('polynomial', v, x, 0.4, 0.3, 3)
                               for a, y, v in zip(alphas, labels, vectors))
        assert svm_service.decision(model, x) == pytest.approx(expected, rel=1e-10, abs=1e-10)
    with pytest.raises(DimensionError):
        svm_service.decision(model, [1.0, 2.0])


def test_ovo_trains_one_machine_per_pair():
    train = make_blobs(6, 3, seed=5, classes=(1, 2, 4))
    model = svm_service.ovo_train(train, Kernel.linear(), SmoConfig(C=0.5))
    assert [(m.class_a, m.class_b) for m in model.machines] == [(1, 2), (1, 4), (2, 4)]
    assert model.classes == [ActivityLabel(1), ActivityLabel(2), ActivityLabel(4)]


def test_pair_machines_only_see_their_classes():
    train = make_blobs(6, 3, seed=5, classes=(1, 2, 3))
    model = svm_service.ovo_train(train, Kernel.linear(), SmoConfig(C=0.5))
    rows = {tuple(row): int(label) for row, label in zip(train.features.tolist(), train.labels.tolist())}
    for machine in model.machines:
        for vector, sign in zip(machine.model.support_vectors.tolist(), machine.model.support_labels.tolist()):
            assert rows[tuple(vector)] == (machine.class_a if sign < 0 else machine.class_b)


def test_ovo_on_six_blobs_classifies_training_rows():
    train = make_blobs(8, 6, seed=9)
    model = svm_service.ovo_train(train, Kernel.linear(), SmoConfig(C=0.5))
    assert len(model.machines) == 15
    accuracy = float((svm_service.ovo_predict_batch(model, train.features) == train.labels).mean())
    assert accuracy >= 0.95


def test_ovo_with_process_pool_matches_in_process():
    train = make_blobs(5, 4, seed=2, classes=(1, 3, 5))
    queries = make_blobs(2, 4, seed=3).features
    serial = svm_service.ovo_train(train, Kernel.linear(), SmoConfig(C=0.5))
    pooled = svm_service.ovo_train(train, Kernel.linear(), SmoConfig(C=0.5), workers=2)
    np.testing.assert_array_equal(svm_service.ovo_predict_batch(serial, queries),
                                  svm_service.ovo_predict_batch(pooled, queries))


def test_missing_class_is_skipped_with_a_warning():
    train = make_blobs(4, 3, seed=1, classes=(1, 2, 3))
    with pytest.warns(RuntimeWarning, match='LAYING'):
        model = svm_service.ovo_train(train, Kernel.linear(), SmoConfig(), classes=[1, 2, 3, 6])
    assert len(model.machines) == 3


def test_ovo_needs_two_classes():
    with pytest.raises(CoverageError):
        svm_service.ovo_train(make_blobs(4, 3, seed=1, classes=(2,)), Kernel.linear(), SmoConfig())


def test_strict_majority_vote():
    assert svm_service.ovo_predict(_ensemble(-1.0, -1.0, -1.0), [0.0, 0.0]) == 1
    assert svm_service.ovo_predict(_ensemble(1.0, 1.0, 1.0), [0.0, 0.0]) == 3


def test_zero_decision_goes_to_the_negative_side():
    assert svm_service.ovo_predict(_ensemble(0.0, 0.0, 0.0), [0.0, 0.0]) == 1
    assert svm_service.ovo_predict(_ensemble(1.0, 0.0, 0.0), [0.0, 0.0]) == 2


def test_vote_cycle_is_settled_by_decision_magnitude():
    # 1 beats 2 by 0.3, 2 beats 3 by 0.9, 3 beats 1 by 0.5
    assert svm_service.ovo_predict(_ensemble(-0.3, 0.5, -0.9), [0.0, 0.0]) == 2
    # 1 beats 2 by 0.8, 2 beats 3 by 0.1, 3 beats 1 by 0.5
    assert svm_service.ovo_predict(_ensemble(-0.8, 0.5, -0.1), [0.0, 0.0]) == 1
    # equal magnitudes fall back to the smaller code
    assert svm_service.ovo_predict(_ensemble(-0.5, 0.5, -0.5), [0.0, 0.0]) == 1


def test_machine_order_does_not_matter():
    train = make_blobs(5, 4, seed=12, classes=(1, 2, 3, 4))
    model = svm_service.ovo_train(train, Kernel.polynomial(gamma=0.5, coef0=1.0, degree=2), SmoConfig(C=0.5))
    shuffled = model.model_copy(update={'machines': list(reversed(model.machines))})
    queries = np.random.default_rng(3).uniform(-1, 1, (30, 4))
    np.testing.assert_array_equal(svm_service.ovo_predict_batch(model, queries),
                                  svm_service.ovo_predict_batch(shuffled, queries))


def test_kernel_row_cache_is_lru(rng):
    features = rng.uniform(-1, 1, (5, 3))
    kernel = Kernel.polynomial(gamma=0.5, coef0=1.0, degree=2)
    cache = KernelRowCache(kernel, features, cache_bytes=2 * 5 * 8)
    gram = kernel_matrix(kernel, features, features)
    for index in (0, 1, 0, 2, 1):
        np.testing.assert_allclose(cache.row(index), gram[index], rtol=1e-12)
    assert (cache.hits, cache.misses) == (1, 4)


def test_tiny_cache_still_trains(rng):
    features, targets = _random_problem(rng, 10)
    roomy = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=1.0))
    cramped = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=1.0, cache_bytes=0))
    assert cramped.dual_objective == pytest.approx(roomy.dual_objective, rel=1e-9)


def test_save_and_load(tmp_path):
    train = make_blobs(4, 3, seed=4, classes=(1, 2, 3))
    model = svm_service.ovo_train(train, Kernel.sigmoid(gamma=0.5, coef0=0.0), SmoConfig(C=0.5))
    path = svm_service.save(model, tmp_path / 'svm.json')
    loaded = svm_service.load(path)
    assert loaded.kernel == model.kernel
    np.testing.assert_array_equal(svm_service.ovo_predict_batch(loaded, train.features),
                                  svm_service.ovo_predict_batch(model, train.features))


def test_load_rejects_other_format_versions(tmp_path):
    train = make_blobs(3, 2, seed=4, classes=(1, 2))
    path = svm_service.save(svm_service.ovo_train(train, Kernel.linear(), SmoConfig()), tmp_path / 'svm.json')
    document = json.loads(path.read_text())
    document['format_version'] = 99
    path.write_text(json.dumps(document))
    with pytest.raises(ConfigurationError):
        svm_service.load(path)
    with pytest.raises(ConfigurationError):
        svm_service.load(tmp_path / 'missing.json')


def test_empty_partition_rows_are_rejected():
    empty = Partition.from_arrays(np.zeros((0, 2)), [])
    with pytest.raises(CoverageError):
        svm_service.ovo_train(empty, Kernel.linear(), SmoConfig())


def test_bias_is_refit_when_the_last_step_ends_on_bounds(rng):
    for _ in range(200):
        features, targets = _random_problem(rng, int(rng.integers(4, 13)))
        model = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=1.0))
        assert model.converged, model.max_kkt_violation
        assert svm_service.kkt_report(model, features, targets) <= 1e-3


def test_all_bound_solution_takes_the_middle_of_the_feasible_bias_interval():
    # w = 0 at the optimum, so any bias in [-1, 1] is feasible
    features = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    targets = np.array([-1, -1, 1, 1])
    model = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=0.1))
    np.testing.assert_allclose(model.alphas, 0.1, atol=1e-2)
    margins = targets * svm_service.decision_batch(model, features)
    assert (margins <= 1.0 + 1e-9).all()
    assert model.converged


def test_empty_machine_still_checks_query_width():
    machine = _constant_machine(1, 2, 0.5).model
    assert machine.dimension == 2
    with pytest.raises(DimensionError):
        svm_service.decision(machine, [0.0, 0.0, 0.0])
    reloaded = BinarySvm.model_validate_json(machine.model_dump_json())
    assert reloaded.dimension == 2
    with pytest.raises(DimensionError):
        svm_service.decision_batch(reloaded, np.zeros((3, 5)))
    assert svm_service.decision(reloaded, [1.0, -1.0]) == 0.5


def test_trained_machine_records_its_width(rng):
    features, targets = _random_problem(rng, 8, dimension=3)
    model = svm_service.smo_train(features, targets, Kernel.linear(), SmoConfig(C=1.0))
    assert model.feature_count == 3
