"""
Fixtures compartidas: mallas pequeñas, campos sembrados y datos iniciales.
"""

import json

import pytest

from src.dynamics.initial_data import boundary_bump, random_smooth_field, sine_combination
from src.dynamics.state import IntegratorConfig
from src.spectral.spectral_core import GridSpec


@pytest.fixture
def grid_1d():
    return GridSpec.cube(1, 16)


@pytest.fixture
def grid_2d():
    return GridSpec.cube(2, 8)


@pytest.fixture
def smooth_field(grid_1d):
    return random_smooth_field(grid_1d, seed=3, amplitude=0.7)


@pytest.fixture
def sine_data(grid_1d):
    """Datos (φ, ψ₀, ψ₁) con pocos modos y amplitud moderada."""
    phi = sine_combination(grid_1d, [((1,), 0.5), ((2,), (0.2, 0.1))], 'complex')
    psi0 = sine_combination(grid_1d, [((1,), 0.3)], 'real')
    psi1 = sine_combination(grid_1d, [((2,), 0.1)], 'real')
    return phi, psi0, psi1


@pytest.fixture
def bump_data(grid_1d):
    return (boundary_bump(grid_1d, amplitude=0.5, kind='complex'),
            boundary_bump(grid_1d, amplitude=0.3, kind='real'),
            boundary_bump(grid_1d, amplitude=0.0, kind='real'))


@pytest.fixture
def cfg():
    return IntegratorConfig('lawson-rk4', 1e-3, True, 1.0)


@pytest.fixture
def write_config(tmp_path):
    """Escribe un archivo de configuración JSON y devuelve su ruta."""
    def _write(payload, name='config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding='utf-8')
        return str(path)
    return _write
