"""
Pruebas del oráculo de Picard y de su acuerdo con el integrador.
"""

import numpy as np
import pytest

from src.dynamics.dynamics import run
from src.dynamics.picard import picard_solve, trajectory_agreement
from src.dynamics.state import IntegratorConfig
from src.utils.errors import ConfigurationError, HorizonTooLargeError


class TestPicardSolve:
    """Iteración de punto fijo de las ecuaciones de Duhamel."""

    def test_linear_flow_without_coupling(self, sine_data):
        picard = picard_solve(*sine_data, 8, 0.05, dt=1e-2, coupling=0.0)
        assert picard.sweeps == 1
        stepped = run(*sine_data, 8, IntegratorConfig(dt=1e-2, coupling=0.0), 0.05, sample_every=1)
        assert trajectory_agreement(picard, stepped) <= 1e-10

    def test_agrees_with_stepper(self, sine_data):
        picard = picard_solve(*sine_data, 'inf', 0.05, tol=1e-12, dt=1e-3)
        stepped = run(*sine_data, 'inf', IntegratorConfig(dt=1e-3), 0.05, sample_every=1)
        assert picard.times.shape == (51,)
        assert trajectory_agreement(picard, stepped) <= 1e-6

    def test_agrees_with_fine_stepper_over_tenth(self, sine_data):
        picard = picard_solve(*sine_data, 'inf', 0.1, tol=1e-12, dt=1e-3)
        stepped = run(*sine_data, 'inf', IntegratorConfig(dt=1e-4), 0.1, sample_every=10)
        assert len(stepped.times) == 101
        assert trajectory_agreement(picard, stepped) <= 1e-6

    def test_increments_decrease(self, sine_data):
        picard = picard_solve(*sine_data, 8, 0.05, tol=1e-12, dt=1e-3)
        increments = picard.increments
        assert increments[-1] < 1e-12
        assert increments[-1] < increments[0]

    def test_state_at(self, sine_data):
        picard = picard_solve(*sine_data, 8, 0.02, dt=1e-2)
        state = picard.state_at(-1)
        assert state.t == pytest.approx(0.02)
        assert np.all(np.isfinite(state.u.coeffs))

    def test_zero_horizon(self, sine_data):
        picard = picard_solve(*sine_data, 8, 0.0)
        assert picard.times.shape == (1,)

    def test_oversized_horizon(self, sine_data):
        with pytest.raises(HorizonTooLargeError) as info:
            picard_solve(*sine_data, 'inf', 2.0, dt=1e-2, coupling=300.0, max_sweeps=30)
        assert info.value.increments

    def test_invalid_horizon(self, sine_data):
        with pytest.raises(ConfigurationError, match="horizonte"):
            picard_solve(*sine_data, 8, -0.1)

    def test_disjoint_sampling_rejected(self, sine_data):
        picard = picard_solve(*sine_data, 8, 0.02, dt=1e-2)
        stepped = run(*sine_data, 8, IntegratorConfig(dt=3e-3), 0.02, sample_every=1)
        stepped.samples = stepped.samples[1:-1]
        with pytest.raises(ConfigurationError, match="instantes"):
            trajectory_agreement(picard, stepped)
