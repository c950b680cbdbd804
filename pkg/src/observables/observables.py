"""
Módulo de observables escalares del sistema de Klein-Gordon-Schrödinger.
Contiene la carga, la energía (verdadera y regularizada), la energía de segundo
orden con su derivada analítica, la cota inferior de coercividad con constantes de
Gagliardo-Nirenberg estimadas y el ajuste de la envolvente de crecimiento.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np

from src.dynamics.initial_data import boundary_bump
from src.dynamics.state import RegLevel
from src.spectral.spectral_core import (
    GridSpec,
    density_coefficients,
    gradient_density_pairing,
    gradient_norm,
    l2_norm,
    laplacian_norm,
    lp_norm,
    product_coefficients,
    sobolev_norm,
    yosida_apply,
    yosida_values,
)
from src.utils.errors import ConfigurationError, SamplingError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('t', 'Q', 'E', 'En', 'Fn', 'l2_u', 'h1_u', 'h2_u', 'l2_v', 'h1_v', 'h2_v', 'l2_vt', 'h1_vt')

# Exponentes de crecimiento de la norma H²⊕H²⊕H¹ por dimensión
GROWTH_EXPONENTS = {1: 4.0 / 3.0, 2: 2.0, 3: 4.0}

ENVELOPE_SLACK = 0.2
# Holgura del exponente en N = 3 (mallas gruesas)
ENVELOPE_SLACK_3D = 0.3

GN_SAFETY = 2.0

# Pares (N, p) de Gagliardo-Nirenberg usados por la cota de coercividad
COERCIVITY_EXPONENTS = {1: (math.inf,), 2: (8.0 / 3.0, 4.0), 3: (12.0 / 5.0, 6.0)}

GN_DEFAULT_MODES = {1: 64, 2: 24, 3: 12}

N4_SMALLNESS_DOC = """
Condición de pequeñez en dimensión N = 4 (solo documentación, no se evalúa).

La existencia global en N = 4 exige que la carga inicial sea pequeña:
    ‖φ‖₂ < δ := min(1 / (C_{4,4} · C_{4,8/3}²), ...),
donde C_{4,p} son las mejores constantes de Gagliardo-Nirenberg
‖u‖_p ≤ C_{4,p} ‖∇u‖₂^{δ(p)} ‖u‖₂^{1-δ(p)}, δ(p) = 2 - 4/p.

Discrepancia registrada: en el planteamiento general el segundo factor aparece
con subíndice C_{4,3/8}, mientras que la observación que define δ usa C_{4,8/3}.
Aquí se documenta la forma C_{4,8/3} (el único exponente admisible, pues
3/8 < 2) y la discrepancia queda señalada sin resolver.
"""


@dataclass(frozen=True)
class ObsRecord:
    """
    Registro de observables en un instante; los campos siguen el orden de columnas del CSV.
    """
    t: float
    Q: float
    E: float
    En: float
    Fn: float
    l2_u: float
    h1_u: float
    h2_u: float
    l2_v: float
    h1_v: float
    h2_v: float
    l2_vt: float
    h1_vt: float

    @property
    def h1_triple(self):
        """‖u‖²_{H¹} + ‖v‖²_{H¹} + ‖∂_t v‖²₂."""
        return self.h1_u ** 2 + self.h1_v ** 2 + self.l2_vt ** 2

    @property
    def h2_triple(self):
        """‖u‖²_{H²} + ‖v‖²_{H²} + ‖∂_t v‖²_{H¹}."""
        return self.h2_u ** 2 + self.h2_v ** 2 + self.h1_vt ** 2

    def as_dict(self):
        return dataclasses.asdict(self)

    def is_finite(self):
        return all(math.isfinite(value) for value in self.as_dict().values())


@dataclass(frozen=True)
class SecondEnergyTerms:
    """
    Términos de la energía de segundo orden F_n.

    Attributes:
        laplacian_u: ‖Δu‖².
        meson_kinetic: ½‖∇∂_t v‖².
        meson_potential: ½(‖Δv‖² + ‖∇v‖²).
        interaction_square: c²‖J²(J²v·J²u)‖².
        gradient_coupling: -c(∇J²v | ∇|J²u|²).
        density_coupling: -2c(J²v | |∇J²u|²).
    """
    laplacian_u: float
    meson_kinetic: float
    meson_potential: float
    interaction_square: float
    gradient_coupling: float
    density_coupling: float

    @property
    def total(self):
        return (self.laplacian_u + self.meson_kinetic + self.meson_potential
                + self.interaction_square + self.gradient_coupling + self.density_coupling)


def _smoothed(state, n):
    level = RegLevel.parse(n)
    return yosida_apply(state.u, level, 2), yosida_apply(state.v, level, 2), yosida_apply(state.vt, level, 2)


def charge(state):
    """Carga Q = ‖u‖₂²."""
    return l2_norm(state.u) ** 2


def energy_regularized(state, n, dealias=True, coupling=1.0):
    """
    Energía regularizada
        E_n = ‖∇u‖² + ½(‖∇v‖² + ‖v‖² + ‖∂_t v‖²) - c(J²v | |J²u|²).

    El término de acoplamiento es la cuadratura en la malla refinada, la misma que
    usa el lado derecho; con n = ∞ se obtiene la energía original.
    """
    a, w, _ = _smoothed(state, n)
    quadratic = gradient_norm(state.u) ** 2 + 0.5 * (
        gradient_norm(state.v) ** 2 + l2_norm(state.v) ** 2 + l2_norm(state.vt) ** 2
    )
    if coupling == 0:
        return quadratic
    density = density_coefficients(a.coeffs, state.grid, dealias)
    return quadratic - coupling * float(np.sum(w.coeffs * density))


def energy(state, dealias=True, coupling=1.0):
    """Energía E del sistema sin regularizar."""
    return energy_regularized(state, RegLevel.infinite(), dealias, coupling)


def second_energy(state, n, dealias=True, coupling=1.0):
    """
    Energía de segundo orden F_n término a término.

    Args:
        state (State): Estado.
        n (int | float | RegLevel): Nivel de Yosida.
        dealias (bool): Productos en la malla refinada.
        coupling (float): Intensidad del acoplamiento.

    Returns:
        SecondEnergyTerms: Los seis términos; `total` es F_n.
    """
    grid = state.grid
    a, w, _ = _smoothed(state, n)
    j2 = yosida_values(grid, RegLevel.parse(n), 2)
    mixed = j2 * product_coefficients(w.coeffs, a.coeffs, grid, dealias)
    density = density_coefficients(a.coeffs, grid, dealias)
    lam = grid.eigenvalues
    return SecondEnergyTerms(
        laplacian_u=laplacian_norm(state.u) ** 2,
        meson_kinetic=0.5 * gradient_norm(state.vt) ** 2,
        meson_potential=0.5 * (laplacian_norm(state.v) ** 2 + gradient_norm(state.v) ** 2),
        interaction_square=coupling ** 2 * float(np.sum(np.abs(mixed) ** 2)),
        # -(∇w | ∇|a|²) = (Δw | |a|²)
        gradient_coupling=-coupling * float(np.sum(lam * w.coeffs * density)),
        density_coupling=-2.0 * coupling * gradient_density_pairing(w, a, dealias),
    )


def second_energy_rate(state, n, dealias=True, coupling=1.0):
    """
    Derivada temporal analítica de F_n a lo largo del flujo regularizado:
        F_n' = -2c(J²∂_t v | |∇J²u|²) + 2c² Re(J²(J²∂_t v·J²u) | J²(J²v·J²u)).
    """
    grid = state.grid
    a, w, wt = _smoothed(state, n)
    j2 = yosida_values(grid, RegLevel.parse(n), 2)
    mixed = j2 * product_coefficients(w.coeffs, a.coeffs, grid, dealias)
    mixed_rate = j2 * product_coefficients(wt.coeffs, a.coeffs, grid, dealias)
    pairing = gradient_density_pairing(wt, a, dealias)
    cross = float(np.real(np.sum(mixed_rate * np.conj(mixed))))
    return -2.0 * coupling * pairing + 2.0 * coupling ** 2 * cross


@dataclass(frozen=True)
class RateCheckReport:
    """Comparación entre la diferencia centrada de F_n y su derivada analítica."""
    dt: float
    max_mismatch: float
    scale: float
    samples: int

    @property
    def relative_mismatch(self):
        return self.max_mismatch / self.scale if self.scale > 0 else self.max_mismatch


def second_energy_rate_check(states, n, dealias=True, coupling=1.0):
    """
    Contrasta la diferencia centrada de F_n con second_energy_rate en los puntos interiores.

    Args:
        states (list): Estados equiespaciados en el tiempo.
        n (int | float | RegLevel): Nivel de Yosida del flujo.

    Returns:
        RateCheckReport: Máximo desajuste absoluto y escala max|F_n|.

    Raises:
        SamplingError: Con menos de 5 muestras o espaciado no uniforme.
    """
    if len(states) < 5:
        raise SamplingError(f"se requieren al menos 5 muestras (recibidas {len(states)})")
    times = np.array([s.t for s in states])
    steps = np.diff(times)
    dt = float(steps.mean())
    if dt == 0 or np.max(np.abs(steps - dt)) > 1e-9 * abs(dt):
        raise SamplingError("la trayectoria no está equiespaciada en el tiempo")
    values = np.array([second_energy(s, n, dealias, coupling).total for s in states])
    centered = (values[2:] - values[:-2]) / (2 * dt)
    analytic = np.array([second_energy_rate(s, n, dealias, coupling) for s in states[1:-1]])
    mismatch = float(np.max(np.abs(centered - analytic)))
    logger.debug("F_n': desajuste máximo %.3e con dt = %.3e", mismatch, dt)
    return RateCheckReport(dt=dt, max_mismatch=mismatch, scale=float(np.max(np.abs(values))), samples=len(states))


def observe(state, n, dealias=True, coupling=1.0):
    """
    Calcula el registro completo de observables de un estado.

    Args:
        state (State): Estado.
        n (int | float | RegLevel): Nivel de Yosida de E_n y F_n.
        dealias (bool): Productos en la malla refinada.
        coupling (float): Intensidad del acoplamiento.

    Returns:
        ObsRecord: Registro con las columnas del CSV.
    """
    return ObsRecord(
        t=float(state.t),
        Q=charge(state),
        E=energy(state, dealias, coupling),
        En=energy_regularized(state, n, dealias, coupling),
        Fn=second_energy(state, n, dealias, coupling).total,
        l2_u=l2_norm(state.u),
        h1_u=sobolev_norm(state.u, 1),
        h2_u=sobolev_norm(state.u, 2),
        l2_v=l2_norm(state.v),
        h1_v=sobolev_norm(state.v, 1),
        h2_v=sobolev_norm(state.v, 2),
        l2_vt=l2_norm(state.vt),
        h1_vt=sobolev_norm(state.vt, 1),
    )


# --- Gagliardo-Nirenberg y coercividad -------------------------------------------------

def gn_delta(dim, p):
    """Exponente δ = N/2 - N/p; lanza ConfigurationError si p no es admisible."""
    if math.isinf(p):
        if dim != 1:
            raise ConfigurationError("p = ∞ solo es admisible en dimensión 1")
        return 0.5
    if p < 2:
        raise ConfigurationError(f"p debe ser >= 2 (recibido {p})")
    delta = dim / 2 - dim / p
    if not 0 <= delta <= 1:
        raise ConfigurationError(f"p = {p} fuera del rango admisible en dimensión {dim}")
    return delta


def gn_ratio(field, p, refine=2):
    """Cociente ‖u‖_p / (‖u‖_{H¹}^δ ‖u‖₂^{1-δ}); invariante por escalado de amplitud."""
    delta = gn_delta(field.grid.dim, p)
    l2 = l2_norm(field)
    if l2 == 0:
        return 0.0
    numerator = l2 if p == 2 else lp_norm(field, p, refine)
    return numerator / (sobolev_norm(field, 1) ** delta * l2 ** (1 - delta))


def gn_estimate(dim, p, ensemble_size=256, seed=0, grid=None):
    """
    Estimación (cota inferior) de la constante de Gagliardo-Nirenberg C_{N,p}.

    Toma el máximo del cociente sobre un conjunto sembrado de pulsos gaussianos
    compatibles con la frontera, de centro aleatorio y anchura log-uniforme.

    Args:
        dim (int): Dimensión N.
        p (float): Exponente admisible.
        ensemble_size (int): Número de campos del conjunto.
        seed (int): Semilla.
        grid (GridSpec, optional): Malla; por defecto un cubo de lado π.

    Returns:
        float: Máximo del cociente sobre el conjunto.
    """
    gn_delta(dim, p)
    if ensemble_size < 1:
        raise ConfigurationError("ensemble_size debe ser >= 1")
    grid = grid or GridSpec.cube(dim, GN_DEFAULT_MODES[dim])
    if grid.dim != dim:
        raise ConfigurationError("la malla no coincide con la dimensión pedida")
    rng = np.random.default_rng(seed)
    lengths = np.array(grid.lengths)
    narrowest = 3 * max(grid.spacing())
    best = 0.0
    for _ in range(ensemble_size):
        center = lengths * rng.uniform(0.2, 0.8, size=dim)
        width = math.exp(rng.uniform(math.log(narrowest), math.log(lengths.min() / 4)))
        momentum = rng.uniform(0.0, 4.0)
        bump = boundary_bump(grid, center=center, width=width, momentum=momentum)
        best = max(best, gn_ratio(bump, p))
    logger.debug("C_{%d,%s} estimada = %.4f (%d muestras)", dim, p, best, ensemble_size)
    return best


@dataclass(frozen=True)
class CoercivityConstants:
    """Constantes de Gagliardo-Nirenberg (con factor de seguridad) por exponente p."""
    dim: int
    values: dict


def coercivity_constants(dim, ensemble_size=256, seed=0, safety=GN_SAFETY, grid=None):
    """Estima las constantes que necesita la cota de coercividad en dimensión N."""
    if dim not in COERCIVITY_EXPONENTS:
        raise ConfigurationError(f"dimensión no soportada: {dim}")
    values = {p: safety * gn_estimate(dim, p, ensemble_size, seed, grid) for p in COERCIVITY_EXPONENTS[dim]}
    return CoercivityConstants(dim, values)


def _coupling_allowance(dim, phi_l2, constants):
    if dim == 1:
        return constants.values[math.inf] ** 2 * phi_l2 ** 4
    c_a, c_b = (constants.values[p] for p in COERCIVITY_EXPONENTS[dim])
    return 0.5 * phi_l2 ** 2 + 0.5 * c_a ** 8 * c_b ** 4 * phi_l2 ** 6


def coercivity_lower_bound(record, phi_l2, constants):
    """
    Cota inferior de E_n:
        N = 1:    ½‖∇u‖² + ¼S - C²‖φ‖⁴,
        N = 2, 3: ½‖∇u‖² + ¼S - ½‖φ‖² - ½C_a⁸C_b⁴‖φ‖⁶,
    con S = ‖∂_t v‖² + ‖∇v‖² + ‖v‖². Válida para acoplamiento unitario.
    """
    gradient_u = max(record.h1_u ** 2 - record.l2_u ** 2, 0.0)
    meson = record.l2_vt ** 2 + record.h1_v ** 2
    return 0.5 * gradient_u + 0.25 * meson - _coupling_allowance(constants.dim, phi_l2, constants)


def coercivity_check(record, phi_l2, constants):
    """Holgura E_n - cota inferior; no negativa cuando las constantes son cotas superiores válidas."""
    return record.En - coercivity_lower_bound(record, phi_l2, constants)


def uniform_h1_bound(initial_record, phi_l2, constants):
    """Cota uniforme M₁ ≈ 4(E_n(0) + D) + ‖φ‖² de la norma triple H¹⊕H¹⊕L²."""
    allowance = _coupling_allowance(constants.dim, phi_l2, constants)
    return 4.0 * (initial_record.En + allowance) + phi_l2 ** 2


# --- Envolvente de crecimiento ----------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeModel:
    """
    Modelo C' + C·t^exponent ajustado a la norma triple H²⊕H²⊕H¹.

    Attributes:
        dim (int): Dimensión N.
        C (float): Constante de crecimiento ajustada (>= 0).
        C_prime (float): Valor inicial de la norma triple.
        exponent (float): Exponente ajustado (0 si no hay crecimiento).
        bound_exponent (float): Exponente máximo admitido en esa dimensión.
    """
    dim: int
    C: float
    C_prime: float
    exponent: float
    bound_exponent: float


def envelope_fit(times, h2_values, dim):
    """
    Ajusta el exponente de crecimiento de h2(t) - h2(0) en escala log-log.

    Se usa el máximo acumulado de |h2 - h2(0)| sobre la última década [T/10, T].

    Args:
        times (sequence): Instantes (crecientes, desde t = 0).
        h2_values (sequence): Norma triple H²⊕H²⊕H¹ en esos instantes.
        dim (int): Dimensión N.

    Returns:
        EnvelopeModel: Modelo ajustado.
    """
    if dim not in GROWTH_EXPONENTS:
        raise ConfigurationError(f"dimensión no soportada: {dim}")
    times = np.abs(np.asarray(times, dtype=float))
    values = np.asarray(h2_values, dtype=float)
    if times.shape != values.shape or values.size == 0:
        raise SamplingError("series de tiempos y valores incompatibles")
    base = float(values[0])
    growth = np.maximum.accumulate(np.abs(values - base))
    horizon = float(times.max())
    window = (times >= horizon / 10) & (times > 0) & (growth > 1e-12 * max(1.0, abs(base)))
    bound = GROWTH_EXPONENTS[dim]
    if np.count_nonzero(window) < 2 or np.ptp(np.log(times[window])) == 0:
        return EnvelopeModel(dim, 0.0, base, 0.0, bound)
    slope, intercept = np.polyfit(np.log(times[window]), np.log(growth[window]), 1)
    return EnvelopeModel(dim, float(math.exp(intercept)), base, float(max(slope, 0.0)), bound)


def envelope_check(model, series=None, slack=None):
    """
    Pasa si el exponente de crecimiento no supera el exponente admitido más la holgura
    (0.2; 0.3 en N = 3).

    Args:
        model (EnvelopeModel): Modelo ajustado; aporta la dimensión y el exponente admitido.
        series (tuple, optional): (tiempos, valores de h2). Si se da, el exponente se
            ajusta de nuevo sobre la serie en lugar de tomar el del modelo.
        slack (float, optional): Holgura del exponente.

    Returns:
        bool: Veredicto.
    """
    if slack is None:
        slack = ENVELOPE_SLACK_3D if model.dim == 3 else ENVELOPE_SLACK
    exponent = model.exponent if series is None else envelope_fit(*series, model.dim).exponent
    return exponent <= model.bound_exponent + slack
