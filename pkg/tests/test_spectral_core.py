"""
Pruebas del núcleo espectral: malla, transformadas, multiplicadores, productos y normas.
"""

import math

import numpy as np
import pytest

from src.dynamics.initial_data import random_smooth_field
from src.spectral.spectral_core import (
    Field,
    GridSpec,
    Multiplier,
    gradient_norm,
    inner,
    l2_norm,
    laplacian_norm,
    elliptic_constant,
    lp_norm,
    modulus_squared,
    norms,
    omega_apply,
    pointwise_product,
    product_coefficients,
    propagator_kg,
    propagator_schrodinger,
    sobolev_norm,
    transform_to_physical,
    transform_to_spectral,
    yosida_apply,
    yosida_multiplier,
)
from src.utils.errors import ConfigurationError, GridMismatchError


def _dense_projection(values, nodes, spacing, modes, length=math.pi):
    """Proyección de colocación h Σ_j f(x_j) e_k(x_j) evaluada con una matriz densa."""
    basis = math.sqrt(2 / length) * np.sin(np.outer(np.arange(1, modes + 1), nodes) * math.pi / length)
    return spacing * basis @ values


class TestGridSpec:
    """Malla y espectro del Laplaciano de Dirichlet."""

    def test_eigenvalues_on_unit_box(self):
        """En (0, π) los autovalores son k²."""
        grid = GridSpec.cube(1, 6)
        assert grid.eigenvalues == pytest.approx([1, 4, 9, 16, 25, 36])
        assert grid.max_eigenvalue == pytest.approx(36)

    def test_eigenvalues_add_across_axes(self, grid_2d):
        """λ_{(j,k)} = j² + k² en el cuadrado de lado π."""
        assert grid_2d.eigenvalues[2, 4] == pytest.approx(3 ** 2 + 5 ** 2)

    def test_refined_node_counts(self):
        """Con refinamiento r hay r(M+1)-1 nodos interiores por eje."""
        grid = GridSpec(2, (8, 5), (1.0, 2.0))
        assert grid.node_counts(1) == (8, 5)
        assert grid.node_counts(2) == (17, 11)
        assert grid.spacing(2) == pytest.approx((1 / 18, 2 / 12))

    def test_invalid_dimension(self):
        with pytest.raises(ConfigurationError, match="dim"):
            GridSpec.cube(4, 8)

    def test_too_few_modes(self):
        with pytest.raises(ConfigurationError, match="al menos 4 modos"):
            GridSpec.cube(1, 3)


class TestTransforms:
    """Síntesis y análisis en la base de senos."""

    def test_eigenmode_values(self):
        """La síntesis de e_k coincide con sqrt(2/π) sin(kx) en los nodos."""
        grid = GridSpec.cube(1, 8)
        mode = Field.eigenmode(grid, (3,), 'real')
        x = grid.nodes(0)
        expected = math.sqrt(2 / math.pi) * np.sin(3 * x)
        assert np.allclose(transform_to_physical(mode), expected, atol=1e-13)

    def test_refined_samples_recover_coefficients(self, smooth_field):
        """Los modos retenidos se recuperan desde la malla refinada."""
        samples = transform_to_physical(smooth_field, refine=3)
        recovered = transform_to_spectral(samples, smooth_field.grid, refine=3)
        assert recovered.kind == 'complex'
        assert np.allclose(recovered.coeffs, smooth_field.coeffs, atol=1e-13)

    def test_wrong_sample_shape(self, grid_1d):
        with pytest.raises(GridMismatchError):
            transform_to_spectral(np.zeros(5), grid_1d)

    def test_field_rejects_wrong_shape(self, grid_1d):
        with pytest.raises(GridMismatchError):
            Field(grid_1d, np.zeros(7))

    def test_mixed_grids_rejected(self, grid_1d):
        other = GridSpec.cube(1, 8)
        with pytest.raises(GridMismatchError, match="mallas distintas"):
            Field.zeros(grid_1d) + Field.zeros(other)


class TestMultipliers:
    """Aproximación de Yosida, potencias de ω y propagadores."""

    def test_yosida_on_eigenmode(self):
        """J_n e_k = n/(n+λ_k) e_k."""
        grid = GridSpec.cube(1, 8)
        mode = Field.eigenmode(grid, (2,))
        smoothed = yosida_apply(mode, 4)
        assert smoothed.coeffs[1] == pytest.approx(4 / (4 + 4))
        squared = yosida_apply(mode, 4, power=2)
        assert squared.coeffs[1] == pytest.approx(0.25)

    def test_infinite_level_is_identity(self, smooth_field):
        assert yosida_apply(smooth_field, math.inf) is smooth_field
        assert yosida_apply(smooth_field, math.inf, power=2) is smooth_field

    def test_level_below_one_rejected(self, grid_1d):
        with pytest.raises(ConfigurationError):
            yosida_multiplier(grid_1d, 0.5)

    def test_omega_inverts(self, smooth_field):
        """ω^{-2}ω² = I."""
        roundtrip = omega_apply(omega_apply(smooth_field, 2), -2)
        assert np.allclose(roundtrip.coeffs, smooth_field.coeffs, atol=1e-14)

    def test_yosida_is_self_adjoint(self, grid_2d):
        f = random_smooth_field(grid_2d, seed=1, decay=1.0)
        g = random_smooth_field(grid_2d, seed=2, decay=1.0)
        for n in (1, 7, 1000):
            smoothing = yosida_multiplier(grid_2d, n)
            left = inner(smoothing.apply(f), g)
            right = inner(f, smoothing.apply(g))
            assert left == pytest.approx(right, rel=1e-13, abs=1e-16)

    def test_schrodinger_propagator_group_law(self, grid_1d):
        forward = propagator_schrodinger(grid_1d, 0.37)
        backward = propagator_schrodinger(grid_1d, -0.37)
        assert np.allclose(forward.compose(backward).values, 1.0, rtol=0, atol=1e-14)

    def test_kg_rotation_preserves_linear_energy(self, grid_1d):
        v0 = random_smooth_field(grid_1d, seed=4, kind='real').coeffs
        vt0 = random_smooth_field(grid_1d, seed=5, kind='real').coeffs
        omega2 = 1.0 + grid_1d.eigenvalues
        initial = np.sum(omega2 * v0 ** 2 + vt0 ** 2)
        for t in (0.1, 1.7, -3.2):
            sine, cosine = propagator_kg(grid_1d, t)
            v = cosine.values * v0 + sine.values * vt0
            vt = cosine.values * vt0 - omega2 * sine.values * v0
            assert np.sum(omega2 * v ** 2 + vt ** 2) == pytest.approx(initial, rel=1e-13)

    def test_schrodinger_propagator_identity_at_zero(self, grid_1d):
        assert np.array_equal(propagator_schrodinger(grid_1d, 0.0).values, np.ones(grid_1d.modes))

    def test_schrodinger_propagator_is_unitary(self, smooth_field):
        evolved = propagator_schrodinger(smooth_field.grid, 0.37).apply(smooth_field)
        assert l2_norm(evolved) == pytest.approx(l2_norm(smooth_field), rel=1e-14)

    def test_kg_propagator_at_zero(self, grid_1d):
        sine, cosine = propagator_kg(grid_1d, 0.0)
        assert np.array_equal(sine.values, np.zeros(grid_1d.modes))
        assert np.array_equal(cosine.values, np.ones(grid_1d.modes))

    def test_kg_propagator_solves_mode_equation(self, grid_1d):
        """K̈ = -ω²K por diferencias centradas."""
        h = 1e-4
        t = 0.3
        omega2 = 1.0 + grid_1d.eigenvalues
        values = [propagator_kg(grid_1d, t + s)[0].values for s in (-h, 0.0, h)]
        second = (values[0] - 2 * values[1] + values[2]) / h ** 2
        assert np.allclose(second, -omega2 * values[1], rtol=1e-5, atol=1e-5)

    def test_non_finite_time_rejected(self, grid_1d):
        with pytest.raises(ConfigurationError):
            propagator_kg(grid_1d, math.inf)

    def test_multiplier_compose(self, grid_1d):
        a = yosida_multiplier(grid_1d, 3)
        composed = a.compose(a)
        assert np.allclose(composed.values, yosida_multiplier(grid_1d, 3, power=2).values)
        assert isinstance(composed, Multiplier)


class TestProducts:
    """Productos puntuales como proyección de colocación."""

    @pytest.mark.parametrize('dealias, refine', [(True, 2), (False, 1)])
    def test_product_matches_dense_projection(self, dealias, refine):
        grid = GridSpec.cube(1, 8)
        f = Field.eigenmode(grid, (1,), 'real')
        g = Field.eigenmode(grid, (2,), 'real', amplitude=0.5)
        x = grid.nodes(0, refine)
        values = (math.sqrt(2 / math.pi) * np.sin(x)) * (0.5 * math.sqrt(2 / math.pi) * np.sin(2 * x))
        expected = _dense_projection(values, x, grid.spacing(refine)[0], 8)
        product = pointwise_product(f, g, dealias)
        assert product.kind == 'real'
        assert np.allclose(product.coeffs, expected, atol=1e-13)

    def test_dealiased_product_in_two_dimensions(self, grid_2d):
        """En 2D el producto de modos separables se factoriza por ejes."""
        f = Field.eigenmode(grid_2d, (1, 1), 'real')
        g = Field.eigenmode(grid_2d, (2, 1), 'real')
        coeffs = product_coefficients(f.coeffs, g.coeffs, grid_2d)
        x = grid_2d.nodes(0, 2)
        h = grid_2d.spacing(2)[0]
        c = math.sqrt(2 / math.pi)
        along_x = _dense_projection(c * np.sin(x) * c * np.sin(2 * x), x, h, 8)
        along_y = _dense_projection(c * np.sin(x) * c * np.sin(x), x, h, 8)
        assert np.allclose(coeffs, np.outer(along_x, along_y), atol=1e-13)

    def test_modulus_squared_of_real_field(self, grid_1d):
        """Para f real, |f|² coincide con el producto f·f."""
        f = Field(grid_1d, np.linspace(1.0, -0.5, 16), 'real')
        density = modulus_squared(f)
        assert density.kind == 'real'
        assert np.allclose(density.coeffs, pointwise_product(f, f).coeffs, atol=1e-15)

    def test_interaction_pairing_is_real(self, grid_1d, smooth_field):
        """(Π(v·u) | u) es real: la base de la conservación de la carga."""
        v = Field(grid_1d, np.linspace(0.1, -0.2, 16), 'real')
        pairing = inner(pointwise_product(v, smooth_field), smooth_field)
        assert abs(pairing.imag) <= 1e-13 * max(1.0, abs(pairing.real))


class TestNorms:
    """Normas de Sobolev y de Lebesgue."""

    def test_sobolev_norm_of_eigenmode(self):
        grid = GridSpec.cube(1, 8)
        mode = Field.eigenmode(grid, (3,), amplitude=2.0)
        assert sobolev_norm(mode, 1) == pytest.approx(2 * math.sqrt(10))
        assert sobolev_norm(mode, -1) == pytest.approx(2 / math.sqrt(10))
        assert gradient_norm(mode) == pytest.approx(6.0)
        assert laplacian_norm(mode) == pytest.approx(18.0)

    def test_discrete_parseval(self, smooth_field):
        """La cuadratura L² en los nodos reproduce la norma espectral."""
        assert lp_norm(smooth_field, 2) == pytest.approx(l2_norm(smooth_field), rel=1e-12)
        assert lp_norm(smooth_field, 2, refine=2) == pytest.approx(l2_norm(smooth_field), rel=1e-12)

    def test_lp_requires_p_at_least_two(self, smooth_field):
        with pytest.raises(ConfigurationError, match="p debe estar"):
            lp_norm(smooth_field, 1.5)

    def test_l4_matches_dense_quadrature(self):
        grid = GridSpec.cube(1, 16)
        f = random_smooth_field(grid, seed=11, decay=1.0)
        x = np.arange(1, 4097) * math.pi / 4097
        basis = math.sqrt(2 / math.pi) * np.sin(np.outer(x, np.arange(1, 17)))
        values = basis @ f.coeffs
        oracle = (math.pi / 4097 * np.sum(np.abs(values) ** 4)) ** 0.25
        assert lp_norm(f, 4, refine=4) == pytest.approx(oracle, rel=1e-6)

    def test_sup_norm(self):
        grid = GridSpec.cube(1, 8)
        mode = Field.eigenmode(grid, (1,))
        # El nodo central x = π/2 está en la malla de 9 intervalos refinada por 2
        assert lp_norm(mode, math.inf, refine=2) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)

    def test_norm_record(self, smooth_field):
        record = norms(smooth_field, ps=(4,))
        assert record.l2 <= record.h1 <= record.h2
        assert record.hm1 <= record.l2
        assert 4 in record.lp

    def test_elliptic_constant_is_one(self, smooth_field):
        assert elliptic_constant(smooth_field) == pytest.approx(1.0, abs=1e-12)
