"""
Tipos de estado del sistema de Klein-Gordon-Schrödinger.
Define el nivel de regularización de Yosida, el estado (u, v, ∂_t v) y la
configuración del integrador temporal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from src.spectral.spectral_core import Field, require_same_grid
from src.utils.errors import ConfigurationError

SCHEMES = ('lawson-rk4', 'rk4')


@dataclass(frozen=True)
class RegLevel:
    """
    Parámetro de Yosida n ∈ {1, 2, ...} ∪ {∞}; n = ∞ desactiva el suavizado (J_∞ = I).

    Args:
        n (float): Entero positivo o math.inf.
    """
    n: float

    def __post_init__(self):
        value = float(self.n)
        if not (math.isinf(value) and value > 0) and not (value >= 1 and value == int(value)):
            raise ConfigurationError(f"n debe ser un entero positivo o infinito (recibido {self.n})")
        object.__setattr__(self, 'n', value)

    @classmethod
    def infinite(cls):
        return cls(math.inf)

    @classmethod
    def parse(cls, value):
        """Acepta un RegLevel, un número o las cadenas 'inf'/'infinity'."""
        if isinstance(value, RegLevel):
            return value
        if isinstance(value, str):
            if value.strip().lower() in ('inf', 'infinity', '∞'):
                return cls.infinite()
            return cls(int(value))
        return cls(value)

    @property
    def is_infinite(self):
        return math.isinf(self.n)

    def __float__(self):
        return self.n

    def __str__(self):
        return 'inf' if self.is_infinite else str(int(self.n))


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Configuración del integrador temporal.

    Args:
        scheme (str): 'lawson-rk4' (parte lineal exacta) o 'rk4' (Runge-Kutta clásico).
        dt (float): Paso temporal > 0.
        dealias (bool): Evaluar los productos en la malla refinada.
        coupling (float): Intensidad del acoplamiento de Yukawa; 0 da el flujo lineal.
    """
    scheme: str = 'lawson-rk4'
    dt: float = 1e-3
    dealias: bool = True
    coupling: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"esquema desconocido {self.scheme!r}; opciones: {SCHEMES}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt debe ser positivo (recibido {self.dt})")


@dataclass(frozen=True, eq=False)
class State:
    """
    Estado (u, v, ∂_t v) en el instante t.

    Args:
        u (Field): Campo de nucleones (complejo).
        v (Field): Campo de mesones (real).
        vt (Field): Derivada temporal del campo de mesones (real).
        t (float): Tiempo.
    """
    u: Field
    v: Field
    vt: Field
    t: float = 0.0

    def __post_init__(self):
        require_same_grid(self.u, self.v, self.vt)
        if self.v.kind != 'real' or self.vt.kind != 'real':
            raise ConfigurationError("v y ∂_t v deben ser campos reales")
        if self.u.kind != 'complex':
            object.__setattr__(self, 'u', Field(self.u.grid, self.u.coeffs, 'complex'))

    @property
    def grid(self):
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid, u, v, vt, t=0.0):
        return cls(Field(grid, u, 'complex'), Field(grid, v, 'real'), Field(grid, vt, 'real'), float(t))

    @classmethod
    def zeros(cls, grid, t=0.0):
        return cls(Field.zeros(grid, 'complex'), Field.zeros(grid, 'real'), Field.zeros(grid, 'real'), t)

    def arrays(self):
        """Coeficientes (u, v, vt) como tupla de arreglos de solo lectura."""
        return self.u.coeffs, self.v.coeffs, self.vt.coeffs

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())
