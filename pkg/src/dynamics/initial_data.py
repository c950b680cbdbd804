"""
Módulo de la biblioteca de datos iniciales.
Todos los generadores son deterministas dada la semilla y producen campos
compatibles con la frontera (nulos en las paredes de la caja).
"""

from __future__ import annotations

import logging

import numpy as np

from src.spectral.spectral_core import Field, l2_norm, sobolev_norm, transform_to_spectral
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Refinamiento de la malla de muestreo de los pulsos antes de proyectar
BUMP_REFINE = 4


def _amplitude(value):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigurationError(f"amplitud compleja debe ser [re, im] (recibido {value})")
        return complex(value[0], value[1])
    return value


def sine_combination(grid, terms, kind='complex'):
    """
    Combinación finita de modos de senos.

    Args:
        grid (GridSpec): Malla espectral.
        terms (list): Pares (índice 1-based por eje, amplitud).
        kind (str): 'real' o 'complex'.

    Returns:
        Field: Σ amplitud·e_índice.
    """
    field = Field.zeros(grid, kind)
    for index, amplitude in terms:
        field = field + Field.eigenmode(grid, index, kind, _amplitude(amplitude))
    return field


def boundary_bump(grid, center=None, width=None, amplitude=1.0, momentum=0.0, kind='complex'):
    """
    Pulso gaussiano multiplicado por Π sin(πx_d/L_d), nulo en la frontera.

    Args:
        grid (GridSpec): Malla espectral.
        center (sequence, optional): Centro; por defecto el centro de la caja.
        width (float, optional): Anchura gaussiana; por defecto L_1/8.
        amplitude (float | complex): Amplitud.
        momentum (float): Número de onda de la fase exp(i·momentum·x_1) (solo campos complejos).
        kind (str): 'real' o 'complex'.

    Returns:
        Field: Proyección del pulso sobre los modos retenidos.
    """
    center = [length / 2 for length in grid.lengths] if center is None else list(center)
    width = grid.lengths[0] / 8 if width is None else width
    if len(center) != grid.dim or width <= 0:
        raise ConfigurationError("centro o anchura del pulso inválidos")
    mesh = grid.mesh(BUMP_REFINE)
    squared = sum((x - c) ** 2 for x, c in zip(mesh, center))
    envelope = np.exp(-squared / (2 * width ** 2))
    for x, length in zip(mesh, grid.lengths):
        envelope = envelope * np.sin(np.pi * x / length)
    samples = _amplitude(amplitude) * envelope
    if kind == 'complex':
        samples = samples * np.exp(1j * momentum * mesh[0])
    elif np.iscomplexobj(samples):
        raise ConfigurationError("un campo real requiere amplitud real")
    return transform_to_spectral(np.asarray(samples), grid, kind, refine=BUMP_REFINE)


def rough_field(grid, seed, decay=None, amplitude=1.0, kind='complex'):
    """
    Campo aleatorio con decaimiento algebraico |f̂_k| ~ (1+λ_k)^{-decay}.

    El exponente por defecto (1.5 + N/2)/2 deja el campo en H¹₀ pero no en H²
    cuando crece el número de modos.

    Args:
        grid (GridSpec): Malla espectral.
        seed (int): Semilla.
        decay (float, optional): Exponente de decaimiento.
        amplitude (float): Norma H¹ final.
        kind (str): 'real' o 'complex'.
    """
    decay = (1.5 + grid.dim / 2) / 2 if decay is None else decay
    rng = np.random.default_rng(seed)
    weights = (1.0 + grid.eigenvalues) ** (-decay)
    magnitudes = np.abs(rng.standard_normal(grid.modes)) * weights
    if kind == 'complex':
        coeffs = magnitudes * np.exp(2j * np.pi * rng.random(grid.modes))
    else:
        coeffs = magnitudes * rng.choice([-1.0, 1.0], size=grid.modes)
    field = Field(grid, coeffs, kind)
    norm = sobolev_norm(field, 1)
    return field if norm == 0 else field * (amplitude / norm)


def random_smooth_field(grid, seed, amplitude=1.0, decay=3.0, kind='complex'):
    """Campo aleatorio suave: coeficientes gaussianos con peso (1+λ_k)^{-decay} y norma L² dada."""
    rng = np.random.default_rng(seed)
    weights = (1.0 + grid.eigenvalues) ** (-decay)
    coeffs = rng.standard_normal(grid.modes) * weights
    if kind == 'complex':
        coeffs = coeffs + 1j * rng.standard_normal(grid.modes) * weights
    field = Field(grid, coeffs, kind)
    norm = l2_norm(field)
    return field if norm == 0 else field * (amplitude / norm)


def _terms(params, key):
    return [(entry['index'], entry.get('amplitude', 1.0)) for entry in params.get(key, [])]


def _sine_family(grid, params, seed):
    return (sine_combination(grid, _terms(params, 'phi'), 'complex'),
            sine_combination(grid, _terms(params, 'psi0'), 'real'),
            sine_combination(grid, _terms(params, 'psi1'), 'real'))


def _bump_family(grid, params, seed):
    shape = {'center': params.get('center'), 'width': params.get('width')}
    return (boundary_bump(grid, amplitude=params.get('phi_amplitude', 1.0),
                          momentum=params.get('momentum', 0.0), kind='complex', **shape),
            boundary_bump(grid, amplitude=params.get('psi0_amplitude', 0.5), kind='real', **shape),
            boundary_bump(grid, amplitude=params.get('psi1_amplitude', 0.0), kind='real', **shape))


def _rough_family(grid, params, seed):
    decay = params.get('decay')
    return (rough_field(grid, seed, decay, params.get('phi_amplitude', 1.0), 'complex'),
            rough_field(grid, seed + 1, decay, params.get('psi0_amplitude', 0.5), 'real'),
            rough_field(grid, seed + 2, decay, params.get('psi1_amplitude', 0.5), 'real'))


def _random_family(grid, params, seed):
    decay = params.get('decay', 3.0)
    return (random_smooth_field(grid, seed, params.get('phi_amplitude', 1.0), decay, 'complex'),
            random_smooth_field(grid, seed + 1, params.get('psi0_amplitude', 0.5), decay, 'real'),
            random_smooth_field(grid, seed + 2, params.get('psi1_amplitude', 0.5), decay, 'real'))


DATA_FAMILIES = {
    'sine': _sine_family,
    'bump': _bump_family,
    'rough': _rough_family,
    'random': _random_family,
}


def build_initial_data(grid, family, params=None, seed=0):
    """
    Construye (φ, ψ₀, ψ₁) a partir de una familia con nombre.

    Args:
        grid (GridSpec): Malla espectral.
        family (str): 'sine', 'bump', 'rough' o 'random'.
        params (dict, optional): Parámetros de la familia.
        seed (int): Semilla de las familias aleatorias.

    Returns:
        tuple: (phi, psi0, psi1) como campos.
    """
    if family not in DATA_FAMILIES:
        raise ConfigurationError(f"familia de datos desconocida {family!r}; opciones: {sorted(DATA_FAMILIES)}")
    logger.debug("Datos iniciales '%s' con semilla %d", family, seed)
    try:
        return DATA_FAMILIES[family](grid, dict(params or {}), seed)
    except (KeyError, TypeError) as error:
        raise ConfigurationError(f"parámetros inválidos para la familia {family!r}: {error}") from error
