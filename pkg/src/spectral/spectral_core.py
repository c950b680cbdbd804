"""
Módulo de cálculo espectral en la base de senos de una caja con condiciones de Dirichlet.
Contiene la malla, los campos espectrales, los multiplicadores diagonales (Laplaciano,
aproximación de Yosida, potencias de ω, propagadores), las normas y los productos
puntuales sin aliasing.

Convenciones:
    - La base es ortonormal: e_k(x) = Π_d sqrt(2/L_d) sin(π k_d x_d / L_d), k_d = 1..M_d.
    - Los nodos de colocación son los puntos interiores x_j = j h_d, h_d = L_d/(M_d+1).
    - Con refinamiento r la malla física tiene r(M_d+1)-1 nodos interiores por eje.
    - Las funciones "de arreglo" operan sobre los últimos `dim` ejes, de modo que
      aceptan pilas de coeficientes (por ejemplo, trayectorias completas).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft

from src.utils.errors import ConfigurationError, GridMismatchError

logger = logging.getLogger(__name__)

# Factor de refinamiento de la malla usada para los productos sin aliasing
PAD_FACTOR = 2

FIELD_KINDS = ('complex', 'real')


@dataclass(frozen=True)
class GridSpec:
    """
    Caja (0,L_1)x...x(0,L_N) discretizada con M_d modos de seno por eje.

    Args:
        dim (int): Dimensión espacial N ∈ {1, 2, 3}.
        modes (tuple): Número de modos M_d >= 4 por eje.
        lengths (tuple): Longitudes L_d > 0 por eje.
    """
    dim: int
    modes: tuple
    lengths: tuple

    def __post_init__(self):
        object.__setattr__(self, 'modes', tuple(int(m) for m in self.modes))
        object.__setattr__(self, 'lengths', tuple(float(length) for length in self.lengths))
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim debe ser 1, 2 o 3 (recibido {self.dim})")
        if len(self.modes) != self.dim or len(self.lengths) != self.dim:
            raise ConfigurationError("modes y lengths deben tener una entrada por eje")
        if any(m < 4 for m in self.modes):
            raise ConfigurationError(f"se requieren al menos 4 modos por eje (recibido {self.modes})")
        if any(not (math.isfinite(length) and length > 0) for length in self.lengths):
            raise ConfigurationError(f"las longitudes deben ser positivas y finitas (recibido {self.lengths})")

    @classmethod
    def cube(cls, dim, modes, length=math.pi):
        """Crea una caja con el mismo número de modos y la misma longitud en todos los ejes."""
        return cls(dim, (modes,) * dim, (length,) * dim)

    @property
    def shape(self):
        return self.modes

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    def wavenumbers(self, axis):
        """Números de onda π k / L_d, k = 1..M_d, del eje indicado."""
        k = np.arange(1, self.modes[axis] + 1, dtype=float)
        return math.pi * k / self.lengths[axis]

    def _broadcast(self, values, axis):
        shape = [1] * self.dim
        shape[axis] = self.modes[axis]
        return values.reshape(shape)

    @cached_property
    def eigenvalues(self):
        """Autovalores λ_k = Σ_d (π k_d / L_d)² de -Δ, con la forma de la malla espectral."""
        lam = np.zeros(self.modes)
        for axis in range(self.dim):
            lam = lam + self._broadcast(self.wavenumbers(axis) ** 2, axis)
        lam.setflags(write=False)
        return lam

    @property
    def max_eigenvalue(self):
        return float(self.eigenvalues.max())

    def node_counts(self, refine=1):
        return tuple(refine * (m + 1) - 1 for m in self.modes)

    def spacing(self, refine=1):
        return tuple(length / (refine * (m + 1)) for m, length in zip(self.modes, self.lengths))

    def cell_volume(self, refine=1):
        return math.prod(self.spacing(refine))

    def nodes(self, axis, refine=1):
        """Coordenadas de los nodos interiores del eje indicado."""
        h = self.spacing(refine)[axis]
        return h * np.arange(1, self.node_counts(refine)[axis] + 1, dtype=float)

    def mesh(self, refine=1):
        """Malla física completa (indexación 'ij') como tupla de arreglos."""
        return np.meshgrid(*[self.nodes(axis, refine) for axis in range(self.dim)], indexing='ij')


def _check_kind(kind):
    if kind not in FIELD_KINDS:
        raise ConfigurationError(f"tipo de campo desconocido: {kind!r}")


@dataclass(frozen=True, eq=False)
class Field:
    """
    Campo representado por sus coeficientes en la base de senos.

    Args:
        grid (GridSpec): Malla sobre la que vive el campo.
        coeffs (numpy.ndarray): Coeficientes f̂_k con la forma de grid.modes.
        kind (str): 'complex' o 'real'.
    """
    grid: GridSpec
    coeffs: np.ndarray
    kind: str = 'complex'

    def __post_init__(self):
        _check_kind(self.kind)
        data = np.asarray(self.coeffs)
        if self.kind == 'real':
            if np.iscomplexobj(data):
                if np.any(data.imag != 0):
                    raise ConfigurationError("un campo real no admite coeficientes complejos")
                data = data.real
            data = np.array(data, dtype=np.float64)
        else:
            data = np.array(data, dtype=np.complex128)
        if data.shape != self.grid.modes:
            raise GridMismatchError(f"forma de coeficientes {data.shape} distinta de la malla {self.grid.modes}")
        data.setflags(write=False)
        object.__setattr__(self, 'coeffs', data)

    @classmethod
    def zeros(cls, grid, kind='complex'):
        return cls(grid, np.zeros(grid.modes), kind)

    @classmethod
    def eigenmode(cls, grid, index, kind='complex', amplitude=1.0):
        """Modo propio amplitude·e_k con índice múltiple 1-based."""
        coeffs = np.zeros(grid.modes, dtype=complex if kind == 'complex' else float)
        coeffs[tuple(i - 1 for i in index)] = amplitude
        return cls(grid, coeffs, kind)

    def with_coeffs(self, coeffs, kind=None):
        return Field(self.grid, coeffs, kind or self.kind)

    def _combine(self, other, op):
        require_same_grid(self, other)
        kind = 'real' if self.kind == other.kind == 'real' else 'complex'
        return Field(self.grid, op(self.coeffs, other.coeffs), kind)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        kind = self.kind if np.isrealobj(scalar) else 'complex'
        return Field(self.grid, self.coeffs * scalar, kind)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.coeffs, self.kind)


def require_same_grid(*fields):
    """Verifica que todos los campos compartan la misma malla."""
    grid = fields[0].grid
    for field in fields[1:]:
        if field.grid != grid:
            raise GridMismatchError(f"mallas distintas: {grid} y {field.grid}")
    return grid


@dataclass(frozen=True, eq=False)
class Multiplier:
    """Operador diagonal en la base de senos: (m·f)̂_k = m_k f̂_k."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values)
        if values.shape != self.grid.modes:
            raise GridMismatchError(f"forma del multiplicador {values.shape} distinta de {self.grid.modes}")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def identity(cls, grid):
        return cls(grid, np.ones(grid.modes))

    @property
    def is_real(self):
        return np.isrealobj(self.values)

    def apply(self, field):
        require_same_grid(self, field)
        kind = field.kind if self.is_real else 'complex'
        return Field(field.grid, self.values * field.coeffs, kind)

    __call__ = apply

    def compose(self, other):
        """Composición de multiplicadores: producto puntual de los valores."""
        require_same_grid(self, other)
        return Multiplier(self.grid, self.values * other.values)


# --- Transformadas -----------------------------------------------------------

def _real_transform(func, data, **kwargs):
    # Las transformadas de senos/cosenos actúan por separado sobre parte real e imaginaria
    if np.iscomplexobj(data):
        return func(data.real, **kwargs) + 1j * func(data.imag, **kwargs)
    return func(data, **kwargs)


def _pad(coeffs, grid, counts):
    widths = [(0, 0)] * (coeffs.ndim - grid.dim)
    widths += [(0, count - m) for count, m in zip(counts, grid.modes)]
    if all(after == 0 for _, after in widths):
        return coeffs
    return np.pad(coeffs, widths)


def _truncate(coeffs, grid):
    return coeffs[(Ellipsis,) + tuple(slice(0, m) for m in grid.modes)]


def synthesize(coeffs, grid, refine=1):
    """
    Evalúa una serie de senos (o una pila de ellas) en los nodos de la malla refinada.

    Args:
        coeffs (numpy.ndarray): Coeficientes; los últimos ejes tienen la forma grid.modes.
        grid (GridSpec): Malla espectral.
        refine (int): Factor de refinamiento de la malla física.

    Returns:
        numpy.ndarray: Valores nodales con forma (..., *grid.node_counts(refine)).
    """
    if tuple(coeffs.shape[-grid.dim:]) != grid.modes:
        raise GridMismatchError(f"forma {coeffs.shape} incompatible con la malla {grid.modes}")
    padded = _pad(coeffs, grid, grid.node_counts(refine))
    values = _real_transform(fft.dstn, padded, type=1, norm='ortho', axes=grid.axes)
    return values / math.sqrt(grid.cell_volume(refine))


def analyze(samples, grid, refine=1):
    """
    Proyección de colocación: valores nodales → coeficientes de los modos retenidos.

    Args:
        samples (numpy.ndarray): Valores nodales con forma (..., *grid.node_counts(refine)).
        grid (GridSpec): Malla espectral.
        refine (int): Factor de refinamiento de la malla física.

    Returns:
        numpy.ndarray: Coeficientes truncados a grid.modes.
    """
    counts = grid.node_counts(refine)
    if tuple(samples.shape[-grid.dim:]) != counts:
        raise GridMismatchError(f"forma de muestras {samples.shape} distinta de los nodos {counts}")
    coeffs = _real_transform(fft.dstn, samples, type=1, norm='ortho', axes=grid.axes)
    return _truncate(coeffs * math.sqrt(grid.cell_volume(refine)), grid)


def transform_to_physical(field, refine=1):
    """Valores del campo en los nodos interiores (la frontera es idénticamente cero)."""
    return synthesize(field.coeffs, field.grid, refine)


def transform_to_spectral(samples, grid, kind=None, refine=1):
    """
    Construye un campo a partir de sus valores nodales.

    Args:
        samples (numpy.ndarray): Valores con forma grid.node_counts(refine).
        grid (GridSpec): Malla espectral.
        kind (str, optional): 'real' o 'complex'; por defecto se deduce del tipo de dato.
        refine (int): Factor de refinamiento de la malla de las muestras.

    Returns:
        Field: Campo con los coeficientes de los modos retenidos.
    """
    samples = np.asarray(samples)
    if samples.shape != grid.node_counts(refine):
        raise GridMismatchError(f"forma de muestras {samples.shape} distinta de {grid.node_counts(refine)}")
    if kind is None:
        kind = 'complex' if np.iscomplexobj(samples) else 'real'
    return Field(grid, analyze(samples, grid, refine), kind)


# --- Multiplicadores -----------------------------------------------------------

def _reg_value(n):
    value = float(n)
    if not value >= 1:
        raise ConfigurationError(f"el nivel de regularización debe ser >= 1 o infinito (recibido {n})")
    return value


def laplacian_multiplier(grid):
    """Multiplicador de Δ (autovalores -λ_k)."""
    return Multiplier(grid, -grid.eigenvalues)


def yosida_values(grid, n, power=1):
    """Valores (1 + λ_k/n)^{-power} de J_n^power; unos para n infinito."""
    value = _reg_value(n)
    if math.isinf(value):
        return np.ones(grid.modes)
    return (1.0 / (1.0 + grid.eigenvalues / value)) ** power


def yosida_multiplier(grid, n, power=1):
    return Multiplier(grid, yosida_values(grid, n, power))


def yosida_apply(field, n, power=1):
    """
    Aplica J_n^power = (I - Δ/n)^{-power} al campo.

    Args:
        field (Field): Campo de entrada.
        n (int | float | RegLevel): Nivel de regularización (infinito = identidad).
        power (int): Número de aplicaciones de J_n.

    Returns:
        Field: Campo suavizado; el mismo objeto si n es infinito.
    """
    if math.isinf(_reg_value(n)):
        return field
    return yosida_multiplier(field.grid, n, power).apply(field)


def omega_values(grid, s):
    """Valores (1 + λ_k)^{s/2} de ω^s."""
    return (1.0 + grid.eigenvalues) ** (s / 2.0)


def omega_apply(field, s):
    """Aplica ω^s, ω = (I - Δ)^{1/2}."""
    return Multiplier(field.grid, omega_values(field.grid, s)).apply(field)


def propagator_schrodinger(grid, t):
    """U(t) = exp(itΔ): multiplicador unimodular exp(-iλ_k t)."""
    if not math.isfinite(t):
        raise ConfigurationError("el tiempo del propagador debe ser finito")
    return Multiplier(grid, np.exp(-1j * grid.eigenvalues * t))


def propagator_kg(grid, t):
    """
    Propagadores de Klein-Gordon K(t) = ω⁻¹ sin(tω) y K̇(t) = cos(tω).

    Returns:
        tuple: (K, K̇) como multiplicadores reales.
    """
    if not math.isfinite(t):
        raise ConfigurationError("el tiempo del propagador debe ser finito")
    omega = np.sqrt(1.0 + grid.eigenvalues)
    return Multiplier(grid, np.sin(t * omega) / omega), Multiplier(grid, np.cos(t * omega))


# --- Productos -----------------------------------------------------------------

def product_coefficients(a, b, grid, dealias=True):
    """Coeficientes de la proyección de colocación del producto puntual a·b."""
    refine = PAD_FACTOR if dealias else 1
    return analyze(synthesize(a, grid, refine) * synthesize(b, grid, refine), grid, refine)


def density_coefficients(a, grid, dealias=True):
    """Coeficientes (reales) de la proyección de colocación de |a|²."""
    refine = PAD_FACTOR if dealias else 1
    values = synthesize(a, grid, refine)
    if np.iscomplexobj(values):
        density = values.real ** 2 + values.imag ** 2
    else:
        density = values ** 2
    return analyze(density, grid, refine)


def pointwise_product(f, g, dealias=True):
    """
    Producto puntual de dos campos proyectado sobre los modos retenidos.

    Con dealias el producto se evalúa en la malla de nodos con espaciado h/2 y se
    trunca de vuelta; es la proyección discreta que conserva carga y energía.

    Returns:
        Field: real si ambos factores son reales, complejo en otro caso.
    """
    grid = require_same_grid(f, g)
    kind = 'real' if f.kind == g.kind == 'real' else 'complex'
    return Field(grid, product_coefficients(f.coeffs, g.coeffs, grid, dealias), kind)


def modulus_squared(f, dealias=True):
    """|f|² como campo real."""
    return Field(f.grid, density_coefficients(f.coeffs, f.grid, dealias), 'real')


def gradient_density_pairing(w, a, dealias=True):
    """
    Emparejamiento (w | |∇a|²) para w real.

    Se evalúa mediante la identidad puntual 2|∇a|² = Δ|a|² - 2Re(ā Δa), con lo que
    coincide exactamente con las integraciones por partes del sistema semidiscreto.
    """
    grid = require_same_grid(w, a)
    lam = grid.eigenvalues
    density = density_coefficients(a.coeffs, grid, dealias)
    mixed = product_coefficients(w.coeffs, a.coeffs, grid, dealias)
    laplace_pairing = -np.sum(lam * w.coeffs * density)
    cross = np.real(np.sum(mixed * np.conj(-lam * a.coeffs)))
    return float(0.5 * laplace_pairing - cross)


# --- Normas y productos escalares ----------------------------------------------------

def inner(f, g):
    """Producto escalar (f | g) = Σ f̂_k conj(ĝ_k)."""
    require_same_grid(f, g)
    return complex(np.sum(f.coeffs * np.conj(g.coeffs)))


def _power_sum(coeffs, weights):
    return float(np.sum(weights * (coeffs.real ** 2 + coeffs.imag ** 2))) if np.iscomplexobj(coeffs) \
        else float(np.sum(weights * coeffs ** 2))


def sobolev_norm(field, s):
    """‖f‖_{H^s} = (Σ (1+λ_k)^s |f̂_k|²)^{1/2}."""
    return math.sqrt(_power_sum(field.coeffs, (1.0 + field.grid.eigenvalues) ** s))


def l2_norm(field):
    return math.sqrt(_power_sum(field.coeffs, 1.0))


def gradient_norm(field):
    """‖∇f‖₂ = (Σ λ_k |f̂_k|²)^{1/2}."""
    return math.sqrt(_power_sum(field.coeffs, field.grid.eigenvalues))


def laplacian_norm(field):
    """‖Δf‖₂ = (Σ λ_k² |f̂_k|²)^{1/2}."""
    return math.sqrt(_power_sum(field.coeffs, field.grid.eigenvalues ** 2))


def lp_norm(field, p, refine=1):
    """
    Norma L^p por cuadratura en los nodos interiores (peso Π h_d).

    Args:
        field (Field): Campo.
        p (float): Exponente en [2, ∞]; con p = ∞ se toma el máximo nodal.
        refine (int): Factor de refinamiento de la malla de cuadratura.

    Raises:
        ConfigurationError: Si p < 2.
    """
    if not p >= 2:
        raise ConfigurationError(f"p debe estar en [2, ∞] (recibido {p})")
    magnitude = np.abs(transform_to_physical(field, refine))
    if math.isinf(p):
        return float(magnitude.max(initial=0.0))
    return float((field.grid.cell_volume(refine) * np.sum(magnitude ** p)) ** (1.0 / p))


@dataclass(frozen=True)
class NormRecord:
    """Normas de un campo: L², H¹, H², H⁻¹ y las L^p solicitadas."""
    l2: float
    h1: float
    h2: float
    hm1: float
    lp: dict


def norms(field, ps=(), refine=1):
    """
    Calcula las normas de Sobolev (sumas ponderadas exactas) y las L^p pedidas.

    Args:
        field (Field): Campo.
        ps (iterable): Exponentes p ∈ [2, ∞] para las normas L^p.
        refine (int): Refinamiento de la cuadratura L^p.

    Returns:
        NormRecord: Registro con todas las normas.
    """
    return NormRecord(
        l2=l2_norm(field),
        h1=sobolev_norm(field, 1),
        h2=sobolev_norm(field, 2),
        hm1=sobolev_norm(field, -1),
        lp={p: lp_norm(field, p, refine) for p in ps},
    )


def elliptic_constant(field):
    """Cociente ‖f‖_{H²}/‖(I-Δ)f‖₂; vale 1 en la realización espectral."""
    denominator = l2_norm(omega_apply(field, 2))
    if denominator == 0.0:
        return 1.0
    return sobolev_norm(field, 2) / denominator
