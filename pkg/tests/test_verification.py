import math

import numpy as np
import pytest

from brinkman.dg_core import StressSpace
from brinkman.errors import ConfigError, StudyError
from brinkman.mesh import diagonal_grid
from brinkman.verification import (ERROR_COLUMNS, ErrorRecord, ErrorTable, StudyConfig, convergence_rate,
                                   convergence_study, error_norms, heterogeneous_case, smooth_case,
                                   polynomial_case, run_level)


# Reference error histories on diagonal meshes, n = 2 ... 64 (mu = 1e-3,
# Dirichlet on the left and top sides). Each row is (dofs, h, errors, rates)
# with errors and rates in ERROR_COLUMNS order.
K1_DIAGONAL = [
    (72, 0.707, (1.17e0, 1.08e-1, 8.95e-1, 1.69e-1, 2.32e2, 2.12e2, 1.04e-1), None),
    (288, 0.354, (5.97e-1, 4.73e-2, 4.56e-1, 9.43e-2, 8.66e1, 7.71e1, 3.87e-2),
     (0.97, 1.19, 0.97, 0.84, 1.42, 1.46, 1.43)),
    (1152, 0.177, (2.99e-1, 2.19e-2, 2.28e-1, 4.90e-2, 3.24e1, 2.84e1, 1.63e-2),
     (1.00, 1.11, 1.00, 0.95, 1.42, 1.44, 1.25)),
    (4608, 0.088, (1.49e-1, 1.07e-2, 1.14e-1, 2.48e-2, 1.17e1, 1.01e1, 7.64e-3),
     (1.00, 1.04, 1.00, 0.98, 1.47, 1.50, 1.09)),
    (18432, 0.044, (7.46e-2, 5.28e-3, 5.68e-2, 1.25e-2, 4.15e0, 3.54e0, 3.75e-3),
     (1.00, 1.01, 1.00, 0.99, 1.49, 1.51, 1.03)),
    (73728, 0.022, (3.73e-2, 2.63e-3, 2.84e-2, 6.26e-3, 1.48e0, 1.25e0, 1.86e-3),
     (1.00, 1.01, 1.00, 1.00, 1.49, 1.50, 1.01)),
]
K2_DIAGONAL = [
    (144, 0.707, (2.60e-1, 3.41e-2, 2.12e-1, 1.41e-2, 2.23e1, 2.03e1, 2.67e-2), None),
    (576, 0.354, (7.25e-2, 8.84e-3, 5.93e-2, 4.32e-3, 6.24e0, 5.40e0, 6.34e-3),
     (1.84, 1.95, 1.84, 1.70, 1.84, 1.91, 2.08)),
    (2304, 0.177, (1.87e-2, 2.25e-3, 1.53e-2, 1.16e-3, 1.48e0, 1.24e0, 1.58e-3),
     (1.96, 1.97, 1.96, 1.90, 2.07, 2.12, 2.00)),
    (9216, 0.088, (4.71e-3, 5.67e-4, 3.85e-3, 2.99e-4, 3.53e-1, 2.89e-1, 3.99e-4),
     (1.99, 1.99, 1.99, 1.96, 2.07, 2.10, 1.99)),
]


def _finite_difference(fn, x, d, step=1e-6):
    shift = np.zeros(2)
    shift[d] = step
    return (fn(x + shift) - fn(x - shift)) / (2 * step)


@pytest.mark.parametrize("make_case", [smooth_case, lambda: polynomial_case(2)])
def test_case_derivatives(make_case, rng):
    case = make_case()
    x = rng.random((50, 2))
    grad = case.velocity_gradient(x)
    for d in range(2):
        assert np.allclose(grad[..., d], _finite_difference(case.velocity, x, d), atol=1e-6)
        assert np.allclose(case.pressure_gradient(x)[..., d], _finite_difference(case.pressure_fn, x, d),
                           atol=1e-6)
    lap = sum(_finite_difference(lambda y: case.velocity_gradient(y)[..., d], x, d) for d in range(2))
    assert np.allclose(case.velocity_laplacian(x), lap, atol=1e-5)


@pytest.mark.parametrize("make_case", [smooth_case, lambda: polynomial_case(1), lambda: polynomial_case(2)])
def test_velocity_is_divergence_free(make_case, rng):
    case = make_case()
    grad = case.velocity_gradient(rng.random((100, 2)))
    assert np.allclose(np.trace(grad, axis1=-2, axis2=-1), 0.0, atol=1e-12)


def test_stress_is_symmetric(case, rng):
    s = case.stress(rng.random((20, 2)))
    assert np.allclose(s, np.swapaxes(s, -1, -2))


def test_force_balances_momentum(case, rng):
    x = rng.random((10, 2))
    kappa = np.full(10, 0.5)
    residual = case.mu / kappa[:, None] * case.velocity(x) - case.stress_divergence(x) - case.force(x, kappa)
    assert np.allclose(residual, 0.0)


def test_traction(case):
    x = np.array([[1.0, 0.3]])
    n = np.array([[1.0, 0.0]])
    assert np.allclose(case.traction(x, n), case.stress(x)[:, :, 0])


def test_pressure_shift_for_dirichlet_meshes(dirichlet_mesh, mixed_mesh, case):
    assert case.normalised_for(mixed_mesh).pressure_shift == 0.0
    shifted = case.normalised_for(dirichlet_mesh)
    assert shifted.pressure_shift != 0.0
    x = np.random.default_rng(0).random((4000, 2))
    # Monte Carlo mean of the shifted pressure
    assert abs(shifted.pressure(x).mean()) < 0.05


def test_heterogeneous_case():
    case = heterogeneous_case(1e4)
    mesh = case.prepare(diagonal_grid(2))
    assert set(np.unique(mesh.kappa)) == {1.0, 1e-4}
    assert np.all(mesh.kappa[mesh.centroids[:, 0] > 0.5] == 1e-4)
    with pytest.raises(ConfigError):
        heterogeneous_case(0.5)


def test_polynomial_case_degree():
    with pytest.raises(ConfigError):
        polynomial_case(3)


def test_error_norms_of_zero_stress(mixed_mesh, case):
    sigma = StressSpace(mixed_mesh, 1).zero_field()
    record = error_norms(sigma, None, None, None, case)
    assert record.e_div > 0 and record.e_a > 0
    assert record.e_norm == pytest.approx(math.sqrt(record.e_a ** 2 + record.e_div ** 2 + record.e_jump ** 2))
    assert math.isnan(record.e0_u) and math.isnan(record.e0_p)


def test_polynomial_solution_is_exact():
    _, record = run_level(StudyConfig(case="polynomial", mu=1.0, levels=1, solver="direct"), 2)
    for name in ("e_norm", "e_a", "e_div", "e_jump", "e0_p"):
        assert getattr(record, name) < 1e-9


def test_quadratic_solution_is_exact_for_cubic_stresses():
    config = StudyConfig(case="polynomial2", mu=1.0, degree=3, levels=1, boundary="all-dirichlet",
                         solver="direct")
    _, record = run_level(config, 2)
    for name in ERROR_COLUMNS:
        assert getattr(record, name) < 1e-8


@pytest.mark.parametrize("degree, reference", [(1, K1_DIAGONAL), (2, K2_DIAGONAL)])
def test_coarsest_level_matches_reference(degree, reference):
    table = convergence_study(StudyConfig(levels=1, degree=degree))
    dofs, h, errors, _ = reference[0]
    record = table.rows[0]
    assert record.dofs == dofs
    assert record.h == pytest.approx(h, abs=1e-3)
    for name, expected in zip(ERROR_COLUMNS, errors):
        tol = 0.1 if name == "e0_ustar" else 0.05
        assert getattr(record, name) == pytest.approx(expected, rel=tol), name


def test_rates_on_crisscross_meshes():
    table = convergence_study(StudyConfig(family="crisscross", levels=3, degree=1))
    assert len(table) == 3
    assert [r.dofs for r in table.rows] == [144, 576, 2304]
    assert table.final_rate("e_norm") == pytest.approx(1.0, abs=0.15)
    # one order more for the deviatoric stress and the pressure
    assert table.final_rate("e_a") == pytest.approx(2.0, abs=0.15)
    assert table.final_rate("e0_p") == pytest.approx(2.0, abs=0.15)
    assert math.isnan(table.rates("e_norm")[0])


@pytest.mark.slow
def test_enhanced_rates_on_crisscross_meshes_k2():
    table = convergence_study(StudyConfig(family="crisscross", levels=4, degree=2))
    assert [r.dofs for r in table.rows] == [288, 1152, 4608, 18432]
    assert table.final_rate("e_norm") == pytest.approx(2.0, abs=0.15)
    assert table.final_rate("e_a") == pytest.approx(3.0, abs=0.15)
    assert table.final_rate("e0_p") == pytest.approx(3.0, abs=0.15)


def test_trace_constraint_on_dirichlet_levels():
    config = StudyConfig(boundary="all-dirichlet", levels=3)
    for level, n in enumerate(config.sizes(), start=1):
        solution, _ = run_level(config, n, level)
        assert solution.mesh.theta == 1
        sigma = solution.sigma
        assert abs(sigma.trace_integral()) < 1e-10 * sigma.l2_norm(), n


def test_failed_level_raises_study_error():
    with pytest.raises(StudyError) as info:
        convergence_study(StudyConfig(levels=2, a_star=-1.0))
    assert info.value.level == 1


def test_study_config_validation():
    for bad in (dict(family="hexagons"), dict(case="cavity"), dict(boundary="none"), dict(levels=0),
                dict(kappa=0.0)):
        with pytest.raises(ConfigError):
            StudyConfig(**bad)
    assert StudyConfig(start=3, levels=3).sizes() == [3, 6, 12]


def test_constant_kappa_changes_solution():
    _, unit = run_level(StudyConfig(levels=1), 2)
    _, scaled = run_level(StudyConfig(levels=1, kappa=1e-2), 2)
    assert scaled.e_norm != unit.e_norm


def test_convergence_rate():
    assert convergence_rate(1.0, 0.25, 1.0, 0.5) == pytest.approx(2.0)
    assert math.isnan(convergence_rate(0.0, 0.1, 1.0, 0.5))
    assert math.isnan(convergence_rate(1.0, 0.5, 0.5, 0.5))


def _table():
    table = ErrorTable(title="demo")
    table.append(ErrorRecord(1, 72, 0.5, 1.0, 0.5, 0.8, 0.1, e0_p=0.2))
    table.append(ErrorRecord(2, 288, 0.25, 0.5, 0.125, 0.4, 0.05, e0_p=0.05))
    return table


def test_table_csv(tmp_path):
    table = _table()
    text = table.to_csv().splitlines()
    assert text[0].startswith("level,dof,h,e_norm,rate,e_a,rate")
    assert len(text) == 3
    cells = text[2].split(",")
    assert cells[:3] == ["2", "288", "0.250000"]
    assert float(cells[4]) == pytest.approx(1.0)
    assert float(cells[6]) == pytest.approx(2.0)
    # e0_u was not computed
    assert cells[11] == "" and cells[12] == ""

    table.write(tmp_path / "t.csv", tmp_path / "t.md")
    assert (tmp_path / "t.csv").read_text() == table.to_csv()
    markdown = (tmp_path / "t.md").read_text()
    assert markdown.startswith("### demo")
    assert "| 1 | 72 | 0.500 | 1.00e+00 | * |" in markdown


def test_table_columns():
    table = _table()
    assert np.allclose(table.column("e_norm"), [1.0, 0.5])
    assert table.final_rate("e0_p") == pytest.approx(2.0)


@pytest.mark.slow
def test_k1_diagonal_error_history():
    table = convergence_study(StudyConfig(levels=6, degree=1))
    assert [r.dofs for r in table.rows] == [row[0] for row in K1_DIAGONAL]
    rates = {name: table.rates(name) for name in ERROR_COLUMNS}
    for i, (_, h, errors, expected_rates) in enumerate(K1_DIAGONAL):
        record = table.rows[i]
        assert record.h == pytest.approx(h, abs=1e-3)
        for j, name in enumerate(ERROR_COLUMNS):
            assert getattr(record, name) == pytest.approx(errors[j], rel=0.05), (i, name)
            if expected_rates is not None:
                assert rates[name][i] == pytest.approx(expected_rates[j], abs=0.1), (i, name)


@pytest.mark.slow
def test_k2_reconstruction_is_divergence_free_at_every_level():
    config = StudyConfig(levels=4, degree=2)
    table = ErrorTable()
    for level, n in enumerate(config.sizes(), start=1):
        solution, record = run_level(config, n, level)
        assert np.max(np.abs(solution.reconstruction.divergence_coefficients())) < 1e-9, n
        table.append(record)
    ustar = ERROR_COLUMNS.index("e0_ustar")
    rates = table.rates("e0_ustar")
    for i, (_, _, _, expected_rates) in enumerate(K2_DIAGONAL[1:], start=1):
        assert rates[i] == pytest.approx(expected_rates[ustar], abs=0.15), i


@pytest.mark.slow
@pytest.mark.parametrize("contrast", [1e2, 1e4, 1e6])
def test_errors_robust_to_permeability_contrast(contrast):
    def study(c):
        return convergence_study(StudyConfig(family="crisscross", case="heterogeneous", contrast=c,
                                             levels=4, degree=1))

    table, unit = study(contrast), study(1.0)
    assert 0.85 <= table.final_rate("e_norm") <= 1.25
    ratio = table.column("e_norm") / unit.column("e_norm")
    assert ratio.max() / ratio.min() < 2.0
