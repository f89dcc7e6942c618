# pylint: skip-file
import itertools
import math
from unittest.mock import patch
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import quad
from slabstack.errors import CapacityError, ConvergenceError, DomainError
from slabstack.models.grid import GridFunction, Interpolation, Representation, TargetFunction, TargetTag
from slabstack.schemas.recurrence import RecurrenceConfig
from slabstack.services import recurrence as recurrence_module
from slabstack.services.bounds import BoundsService
from slabstack.services.matrix import MatrixService
from slabstack.services.recurrence import RecurrenceService
from slabstack.services.slab import SlabService

TAU = TargetFunction.builtin(TargetTag.TAU)


def brute_force_tau(tau1: float, n_slabs: int, nodes: int = 256) -> float:
    # Tensor-product trapezoid over every gap phase, composing rapidities directly.
    params = SlabService.slab_params(tau1)
    psi = 2 * math.pi * np.arange(nodes) / nodes
    eta = np.array([params.two_theta])
    for _ in range(n_slabs - 1):
        eta = SlabService.compose_eta(eta[:, None], params.two_theta, psi[None, :]).ravel()
    tau, _ = SlabService.tau_from_eta(eta)
    return float(np.mean(tau))


def test_quadrature_nodes_fold():
    psi, weights = RecurrenceService.quadrature_nodes(8)
    assert len(psi) == 5
    assert psi[0] == 0.0
    assert psi[-1] == pytest.approx(math.pi)
    assert weights.sum() == pytest.approx(1.0, rel=1e-15)
    assert weights[0] == weights[-1] == pytest.approx(1 / 8)


@pytest.mark.parametrize("tau1", [0.85, 0.3, 0.5, 0.95])
def test_closed_form_anchors(tau1):
    series = RecurrenceService.average_series(tau1, 3, TAU)
    assert series.representation is Representation.LOG_OF_POSITIVE
    tau2 = math.exp(series.result(2).value)
    tau3 = math.exp(series.result(3).value)
    assert tau2 == pytest.approx(tau1 / (2 - tau1), rel=1e-6)
    assert tau3 == pytest.approx(tau1 / math.sqrt(4 / tau1 - 3), rel=1e-6)


def test_anchor_values_at_085():
    series = RecurrenceService.average_series(0.85, 3, TAU)
    assert series.result(2).linear_value == pytest.approx(0.739130, abs=1e-6)
    assert series.result(3).linear_value == pytest.approx(0.650803, abs=1e-6)


def test_nested_quadrature_oracle():
    tau1 = 0.6
    series = RecurrenceService.average_series(tau1, 4, TAU)
    for n in (2, 3, 4):
        assert series.result(n).linear_value == pytest.approx(brute_force_tau(tau1, n, 128), rel=1e-6)


def matrix_torus_tau(tau1: float, n_slabs: int, nodes: int) -> float:
    # Same tensor-product trapezoid, but every realization goes through the transfer-matrix product.
    params = SlabService.slab_params(tau1)
    psi = 2 * math.pi * np.arange(nodes) / nodes
    total = 0.0
    for phases in itertools.product(psi, repeat=n_slabs - 1):
        tau, _ = MatrixService.simulate_matrix_stack(params, list(phases))
        total += tau
    return total / nodes ** (n_slabs - 1)


@pytest.mark.parametrize("tau1", [0.4, 0.5, 0.6, 0.85, 0.95])
def test_matrix_torus_oracle(tau1):
    series = RecurrenceService.average_series(tau1, 3, TAU)
    assert series.result(2).linear_value == pytest.approx(matrix_torus_tau(tau1, 2, 64), abs=1e-6)
    assert series.result(3).linear_value == pytest.approx(matrix_torus_tau(tau1, 3, 80), abs=1e-6)


def closed_form_log_tau(tau1: float, n_slabs: int) -> float:
    if n_slabs == 2:
        return math.log(tau1 / (2 - tau1))
    return math.log(tau1 / math.sqrt(4 / tau1 - 3))


@pytest.mark.parametrize("tau1", [0.2, 0.25, 0.3, 0.5, 0.95])
def test_error_estimate_covers_the_closed_form(tau1):
    series = RecurrenceService.average_series(tau1, 3, TAU)
    for n in (2, 3):
        result = series.result(n)
        assert abs(result.value - closed_form_log_tau(tau1, n)) <= result.error_estimate


@pytest.mark.parametrize("tau1", [0.1, 0.05])
def test_small_tau_raises_the_node_count(tau1):
    params = SlabService.slab_params(tau1)
    config = RecurrenceConfig()
    f_1 = RecurrenceService.build_initial_grid(TAU, 3, params, config)
    f_2 = RecurrenceService.propagate(f_1, params, config)
    assert f_2.quad_nodes > config.quad_nodes
    assert f_2.node_doubling_delta <= config.tolerance
    result = RecurrenceService.average_over_stack(tau1, 3, TAU)
    assert abs(result.value - closed_form_log_tau(tau1, 3)) <= result.error_estimate < 1e-5


def test_node_doubling_gives_up_at_the_cap():
    with patch.object(recurrence_module, "MAX_QUAD_NODES", 256):
        with pytest.raises(ConvergenceError):
            RecurrenceService.average_over_stack(0.05, 3, TAU)


def test_refinement_stays_within_the_error_estimate():
    base = RecurrenceService.average_over_stack(0.85, 20, TAU)
    refined = RecurrenceService.average_over_stack(0.85, 20, TAU, RecurrenceConfig(delta_eta=0.0025, quad_nodes=256))
    assert abs(refined.value - base.value) <= base.error_estimate


def test_custom_target_matches_scipy_quad():
    params = SlabService.slab_params(0.85)
    target = TargetFunction.custom(lambda c: 1.0 / c, positive=True)
    result = RecurrenceService.average_over_stack(0.85, 2, target)
    exact, _ = quad(lambda psi: 1.0 / (params.C**2 + params.S**2 * math.cos(psi)), 0.0, 2 * math.pi)
    assert result.linear_value == pytest.approx(exact / (2 * math.pi), rel=1e-7)


def test_identity_target_one_step():
    params = SlabService.slab_params(0.85)
    config = RecurrenceConfig()
    target = TargetFunction.builtin(TargetTag.IDENTITY_C)
    f_1 = RecurrenceService.build_initial_grid(target, 5, params, config)
    f_2 = RecurrenceService.propagate(f_1, params, config)
    assert f_2.level == 2
    assert f_2.eta_max == pytest.approx(f_1.eta_max - params.two_theta)
    expected = math.log(params.C) + np.log(np.cosh(f_2.eta))
    assert np.allclose(f_2.values, expected, rtol=0, atol=1e-8)


def test_identity_target_reproduces_powers_of_c():
    params = SlabService.slab_params(0.85)
    series = RecurrenceService.average_series(0.85, 30, TargetFunction.builtin(TargetTag.IDENTITY_C))
    for n in (2, 10, 30):
        assert series.result(n).value == pytest.approx(n * math.log(params.C), rel=1e-7)


def test_log_tau_is_self_averaging():
    result = RecurrenceService.average_over_stack(0.85, 50, TargetFunction.builtin(TargetTag.LOG_TAU))
    assert result.representation is Representation.LINEAR
    assert result.log_value is None
    assert result.value == pytest.approx(50 * math.log(0.85), abs=1e-6)


def test_log_tau_one_step_adds():
    params = SlabService.slab_params(0.85)
    config = RecurrenceConfig()
    target = TargetFunction.builtin(TargetTag.LOG_TAU)
    f_1 = RecurrenceService.build_initial_grid(target, 4, params, config)
    f_2 = RecurrenceService.propagate(f_1, params, config)
    expected = math.log(0.85) + f_1.values[: len(f_2.values)]
    assert np.allclose(f_2.values, expected, rtol=0, atol=1e-8)


def test_second_moment():
    params = SlabService.slab_params(0.85)
    n = 12
    result = RecurrenceService.average_over_stack(0.85, n, TargetFunction.builtin(TargetTag.SECOND_MOMENT))
    expected = math.log(2 / 3) + n * math.log((3 * params.C**2 - 1) / 2)
    assert result.value == pytest.approx(expected, abs=1e-6)


def test_inverse_tau_matches_closed_form():
    result = RecurrenceService.average_over_stack(0.85, 8, TargetFunction.builtin(TargetTag.INV_TAU))
    assert result.value == pytest.approx(SlabService.exact_statistics(0.85, 8).log_mean_inv_tau, abs=1e-6)


def test_transparent_slab_is_identity():
    series = RecurrenceService.average_series(1.0, 10, TAU)
    assert all(value == pytest.approx(0.0, abs=1e-15) for value in series.values)


def test_single_slab_returns_target():
    result = RecurrenceService.average_over_stack(0.85, 1, TAU)
    assert result.value == pytest.approx(math.log(0.85), rel=1e-14)
    assert result.error_estimate == 0.0


def test_series_decreases_and_stays_above_bk():
    series = RecurrenceService.average_series(0.85, 30, TAU)
    values = np.array(series.values)
    assert np.all(np.diff(values) < 0)
    for n, value in series.as_mapping().items():
        assert value >= n * math.log(0.85) - 1e-12


def test_error_estimates_are_small():
    series = RecurrenceService.average_series(0.85, 20, TAU)
    assert len(series.error_estimates) == 20
    assert all(0.0 <= error < 1e-5 for error in series.error_estimates)
    assert series.node_doubling_deltas == sorted(series.node_doubling_deltas)


def test_closed_form_start_agrees():
    plain = RecurrenceService.average_series(0.85, 10, TAU)
    seeded = RecurrenceService.average_series(0.85, 10, TAU, RecurrenceConfig(start_from_closed_form=True))
    assert seeded.values[1] == pytest.approx(math.log(0.85 / 1.15), rel=1e-14)
    assert np.allclose(seeded.values, plain.values, rtol=0, atol=1e-6)


def test_linear_interpolation_close_to_cubic():
    cubic = RecurrenceService.average_series(0.85, 6, TAU)
    config = RecurrenceConfig(interpolation=Interpolation.LINEAR, delta_eta=0.001, convergence_check=False)
    linear = RecurrenceService.average_series(0.85, 6, TAU, config)
    assert np.allclose(linear.values, cubic.values, rtol=0, atol=1e-5)


def test_threads_give_the_same_series():
    single = RecurrenceService.average_series(0.85, 15, TAU, RecurrenceConfig(estimate_error=False))
    threaded = RecurrenceService.average_series(0.85, 15, TAU, RecurrenceConfig(estimate_error=False, workers=3))
    assert threaded.values == pytest.approx(single.values, rel=1e-14)


def test_block_evaluation_without_plan():
    with patch.object(recurrence_module, "PLAN_LIMIT", 1000):
        blocked = RecurrenceService.average_series(0.85, 5, TAU, RecurrenceConfig(estimate_error=False))
    cached = RecurrenceService.average_series(0.85, 5, TAU, RecurrenceConfig(estimate_error=False))
    assert blocked.values == pytest.approx(cached.values, rel=1e-14)


def test_capacity_error():
    with pytest.raises(CapacityError):
        RecurrenceService.average_series(0.85, 50, TAU, RecurrenceConfig(max_grid_points=1000))


def test_initial_grid_needs_two_slabs():
    params = SlabService.slab_params(0.85)
    with pytest.raises(DomainError):
        RecurrenceService.build_initial_grid(TAU, 1, params, RecurrenceConfig())


def test_bad_inputs():
    with pytest.raises(DomainError):
        RecurrenceService.average_series(0.85, 0, TAU)
    with pytest.raises(DomainError):
        RecurrenceService.average_series(1.5, 3, TAU)


@pytest.mark.parametrize("nodes", [7, 6, 129])
def test_quad_nodes_validation(nodes):
    with pytest.raises(ValidationError):
        RecurrenceConfig(quad_nodes=nodes)


def test_propagate_past_grid_end():
    params = SlabService.slab_params(0.85)
    short = GridFunction(
        tag=TargetTag.TAU,
        eta_max=0.1,
        delta_eta=0.005,
        values=np.zeros(21),
        representation=Representation.LOG_OF_POSITIVE,
        level=5,
    )
    with pytest.raises(DomainError):
        RecurrenceService.propagate(short, params, RecurrenceConfig())


def test_increasing_level_is_reported():
    params = SlabService.slab_params(0.85)
    config = RecurrenceConfig(convergence_check=False)
    eta = 0.005 * np.arange(201)
    rising = GridFunction(
        tag=TargetTag.TAU,
        eta_max=1.0,
        delta_eta=0.005,
        values=-1.0 + 0.1 * eta,
        representation=Representation.LOG_OF_POSITIVE,
        level=2,
    )
    with patch.object(recurrence_module.logger, "warning") as warning:
        RecurrenceService.propagate(rising, params, config)
    warning.assert_called_once()


@pytest.mark.slow
def test_identity_target_at_200():
    result = RecurrenceService.average_over_stack(0.85, 200, TargetFunction.builtin(TargetTag.IDENTITY_C))
    params = SlabService.slab_params(0.85)
    assert result.value == pytest.approx(200 * math.log(params.C), abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("tau1", [0.3, 0.5, 0.85, 0.95])
def test_sandwich(tau1):
    series = RecurrenceService.average_series(tau1, 200, TAU)
    report = BoundsService.envelopes(tau1, 200)
    for n, upper, lower in zip(report.n_values, report.upper_envelope_log, report.lower_envelope_log):
        value = series.result(n).value
        assert lower - 1e-7 <= value <= upper + 1e-7


def test_failing_custom_target():
    params = SlabService.slab_params(0.85)
    target = TargetFunction.custom(lambda c: math.log(2.0 - c))
    with pytest.raises(DomainError) as info:
        RecurrenceService.build_initial_grid(target, 10, params, RecurrenceConfig())
    assert isinstance(info.value.__cause__, ValueError)


@pytest.mark.slow
def test_refinement_at_200_stays_within_the_error_estimate():
    base = RecurrenceService.average_over_stack(0.85, 200, TAU)
    refined = RecurrenceService.average_over_stack(0.85, 200, TAU, RecurrenceConfig(delta_eta=0.0025, quad_nodes=256))
    assert abs(refined.value - base.value) <= base.error_estimate


@pytest.mark.slow
def test_second_moment_at_100():
    params = SlabService.slab_params(0.85)
    result = RecurrenceService.average_over_stack(0.85, 100, TargetFunction.builtin(TargetTag.SECOND_MOMENT))
    expected = math.log(2 / 3) + 100 * math.log((3 * params.C**2 - 1) / 2)
    assert result.value == pytest.approx(expected, rel=1e-5)


@pytest.mark.slow
def test_log_tau_at_200():
    result = RecurrenceService.average_over_stack(0.85, 200, TargetFunction.builtin(TargetTag.LOG_TAU))
    assert result.value == pytest.approx(200 * math.log(0.85), rel=1e-5)
