"""
Módulo de dinámica del sistema de Klein-Gordon-Schrödinger regularizado.
Contiene el lado derecho del sistema (verdadero y regularizado por Yosida), los
integradores temporales (Lawson-RK4 y RK4 clásico), los datos iniciales
regularizados y el bucle de integración que emite observables.

El sistema regularizado es
    i ∂_t u + Δu = -c J_n²(J_n²v · J_n²u),
    ∂_t² v - Δv + v = c J_n²|J_n²u|²,
escrito en primer orden para (u, v, ∂_t v); con n = ∞ se recupera el sistema original.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from src.dynamics.state import IntegratorConfig, RegLevel, State
from src.observables.observables import observe
from src.spectral.spectral_core import (
    Field,
    density_coefficients,
    product_coefficients,
    require_same_grid,
    yosida_values,
)
from src.utils.errors import BlowUpError, ConfigurationError

logger = logging.getLogger(__name__)

# Umbral de norma L² a partir del cual se declara explosión numérica
BLOWUP_THRESHOLD = 1e12

# Límite de estabilidad de RK4 sobre el eje imaginario (|z| <= 2√2)
RK4_STABILITY_LIMIT = 2.8

DATA_MODES = ('strong', 'finite-energy')


def rk4_stability_bound(grid):
    """Paso máximo admisible para el esquema RK4 clásico en esta malla."""
    lam = grid.max_eigenvalue
    return RK4_STABILITY_LIMIT / max(lam, math.sqrt(1.0 + lam))


class _Kernel:
    """Términos de interacción del sistema en coeficientes (admite pilas de estados)."""

    def __init__(self, grid, level, dealias, coupling):
        self.grid = grid
        self.j2 = None if level.is_infinite else yosida_values(grid, level, 2)
        self.dealias = dealias
        self.coupling = coupling

    def _smooth(self, coeffs):
        return coeffs if self.j2 is None else self.j2 * coeffs

    def interaction(self, u, v):
        """Devuelve (i c J²(J²v·J²u), c J²|J²u|²)."""
        if self.coupling == 0:
            return np.zeros_like(u), np.zeros(np.shape(v))
        ju = self._smooth(u)
        jv = self._smooth(v)
        coupled = self._smooth(product_coefficients(jv, ju, self.grid, self.dealias))
        density = self._smooth(density_coefficients(ju, self.grid, self.dealias))
        return 1j * self.coupling * coupled, self.coupling * density

    def nonlinear(self, y):
        u, v, _ = y
        du, dvt = self.interaction(u, v)
        return du, np.zeros_like(dvt), dvt

    def full(self, y):
        u, v, vt = y
        lam = self.grid.eigenvalues
        du, dvt = self.interaction(u, v)
        return du - 1j * lam * u, vt, dvt - (1.0 + lam) * v


class _LinearFlow:
    """Flujo lineal exacto en un intervalo h: U(h) para u y la rotación (K, K̇) para (v, ∂_t v)."""

    def __init__(self, grid, h):
        lam = grid.eigenvalues
        omega = np.sqrt(1.0 + lam)
        self.phase = np.exp(-1j * lam * h)
        self.cos = np.cos(omega * h)
        self.sin_over_omega = np.sin(omega * h) / omega
        self.omega_sin = omega * np.sin(omega * h)

    def __call__(self, y):
        u, v, vt = y
        return (self.phase * u,
                self.cos * v + self.sin_over_omega * vt,
                self.cos * vt - self.omega_sin * v)


def _combine(y, k, a):
    return tuple(yi + a * ki for yi, ki in zip(y, k))


class Stepper:
    """
    Integrador de un paso para una malla, un nivel de regularización y un paso fijos.

    Args:
        grid (GridSpec): Malla espectral.
        level (RegLevel): Nivel de Yosida del lado derecho.
        scheme (str): 'lawson-rk4' o 'rk4'.
        h (float): Paso con signo (negativo integra hacia atrás).
        dealias (bool): Productos en la malla refinada.
        coupling (float): Intensidad del acoplamiento.
    """

    def __init__(self, grid, level, scheme, h, dealias, coupling):
        self.scheme = scheme
        self.h = h
        self.kernel = _Kernel(grid, level, dealias, coupling)
        if scheme == 'lawson-rk4':
            self.half = _LinearFlow(grid, h / 2)
            self.whole = _LinearFlow(grid, h)

    def advance(self, y):
        if self.scheme == 'lawson-rk4':
            return self._lawson(y)
        return self._rk4(y)

    def _lawson(self, y):
        # RK4 en la imagen de interacción: w = exp(-tL) y
        h, nonlinear = self.h, self.kernel.nonlinear
        y_half = self.half(y)
        k1 = nonlinear(y)
        k2 = nonlinear(_combine(y_half, self.half(k1), h / 2))
        k3 = nonlinear(_combine(y_half, k2, h / 2))
        k4 = nonlinear(_combine(self.whole(y), self.half(k3), h))
        y_whole = self.whole(y)
        k1_whole = self.whole(k1)
        k2_half = self.half(k2)
        k3_half = self.half(k3)
        return tuple(
            yw + h / 6 * (a + 2 * b + 2 * c + d)
            for yw, a, b, c, d in zip(y_whole, k1_whole, k2_half, k3_half, k4)
        )

    def _rk4(self, y):
        h, rhs_full = self.h, self.kernel.full
        k1 = rhs_full(y)
        k2 = rhs_full(_combine(y, k1, h / 2))
        k3 = rhs_full(_combine(y, k2, h / 2))
        k4 = rhs_full(_combine(y, k3, h))
        return tuple(
            yi + h / 6 * (a + 2 * b + 2 * c + d)
            for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
        )


@lru_cache(maxsize=64)
def get_stepper(grid, level, scheme, h, dealias, coupling):
    """Stepper con multiplicadores precalculados, compartido entre llamadas idénticas."""
    return Stepper(grid, level, scheme, h, dealias, coupling)


def rhs(state, n, dealias=True, coupling=1.0):
    """
    Lado derecho del sistema regularizado.

    Args:
        state (State): Estado (u, v, ∂_t v).
        n (int | float | RegLevel): Nivel de Yosida (infinito = sistema original).
        dealias (bool): Productos en la malla refinada.
        coupling (float): Intensidad del acoplamiento.

    Returns:
        tuple: Campos (du, dv, dvt) con du = i(Δu + cJ²(J²v·J²u)), dv = vt,
        dvt = Δv - v + cJ²|J²u|².
    """
    level = RegLevel.parse(n)
    kernel = _Kernel(state.grid, level, dealias, coupling)
    du, dv, dvt = kernel.full(state.arrays())
    grid = state.grid
    return Field(grid, du, 'complex'), Field(grid, dv, 'real'), Field(grid, dvt, 'real')


def _check_blowup(arrays, t):
    for name, coeffs in zip(('u', 'v', 'vt'), arrays):
        if not np.all(np.isfinite(coeffs)):
            raise BlowUpError(f"valores no finitos en {name} en t = {t:.6g}", t)
        norm = math.sqrt(float(np.sum(np.abs(coeffs) ** 2)))
        if norm > BLOWUP_THRESHOLD:
            raise BlowUpError(f"norma L² de {name} = {norm:.3e} supera el umbral en t = {t:.6g}", t)


def _validate_scheme(grid, cfg, h):
    if cfg.scheme == 'rk4' and abs(h) > rk4_stability_bound(grid):
        raise ConfigurationError(
            f"dt = {abs(h):.3e} supera el límite de estabilidad de rk4 ({rk4_stability_bound(grid):.3e})"
        )


def step(state, n, cfg, direction=1, h=None):
    """
    Avanza un paso del esquema configurado.

    Args:
        state (State): Estado actual.
        n (int | float | RegLevel): Nivel de Yosida del lado derecho.
        cfg (IntegratorConfig): Configuración del integrador.
        direction (int): +1 hacia adelante, -1 hacia atrás.
        h (float, optional): Paso sin signo que sustituye a cfg.dt (último paso parcial).

    Returns:
        State: Estado en t + direction·h.

    Raises:
        BlowUpError: Si aparecen valores no finitos o normas por encima del umbral.
    """
    level = RegLevel.parse(n)
    signed = math.copysign(cfg.dt if h is None else h, direction)
    _validate_scheme(state.grid, cfg, signed)
    stepper = get_stepper(state.grid, level, cfg.scheme, signed, cfg.dealias, cfg.coupling)
    arrays = stepper.advance(state.arrays())
    t_new = state.t + signed
    _check_blowup(arrays, t_new)
    return State.from_arrays(state.grid, *arrays, t=t_new)


def regularized_initial_data(phi, psi0, psi1, n, mode='strong'):
    """
    Datos iniciales regularizados.

    Args:
        phi (Field): Dato de u (complejo).
        psi0 (Field): Dato de v (real).
        psi1 (Field): Dato de ∂_t v (real).
        n (int | float | RegLevel): Nivel de Yosida.
        mode (str): 'strong' aplica J_n²; 'finite-energy' aplica J_n una sola vez.

    Returns:
        State: Estado inicial en t = 0.
    """
    if mode not in DATA_MODES:
        raise ConfigurationError(f"modo desconocido {mode!r}; opciones: {DATA_MODES}")
    grid = require_same_grid(phi, psi0, psi1)
    level = RegLevel.parse(n)
    power = 2 if mode == 'strong' else 1
    if level.is_infinite:
        smoothing = np.ones(grid.modes)
    else:
        smoothing = yosida_values(grid, level, power)
    return State.from_arrays(grid, smoothing * phi.coeffs, smoothing * psi0.coeffs, smoothing * psi1.coeffs)


def dynamics_level(n, mode):
    """Nivel de Yosida del lado derecho: n en modo fuerte, ∞ en modo de energía finita."""
    return RegLevel.parse(n) if mode == 'strong' else RegLevel.infinite()


@dataclass(frozen=True, eq=False)
class Sample:
    """Instantánea muestreada de una integración: estado y observables."""
    state: State
    record: object


@dataclass(eq=False)
class RunResult:
    """
    Resultado de una integración.

    Attributes:
        level (RegLevel): Nivel de Yosida usado por el lado derecho.
        samples (list): Lista de Sample en orden temporal.
    """
    level: RegLevel
    samples: list = dataclasses.field(default_factory=list)

    @property
    def records(self):
        return [sample.record for sample in self.samples]

    @property
    def states(self):
        return [sample.state for sample in self.samples]

    @property
    def times(self):
        return np.array([sample.state.t for sample in self.samples])

    @property
    def final_state(self):
        return self.samples[-1].state

    def stacked(self):
        """Coeficientes apilados (tiempos, U, V, VT) de todas las muestras."""
        states = self.states
        return (self.times,
                np.stack([s.u.coeffs for s in states]),
                np.stack([s.v.coeffs for s in states]),
                np.stack([s.vt.coeffs for s in states]))


def run_from_state(state, n, cfg, until, sample_every=1, observer=None, callback=None):
    """
    Integra desde state.t hasta `until` (en cualquier sentido) con pasos de cfg.dt.

    El último paso se acorta para terminar exactamente en `until`. Se registra una
    muestra en el instante inicial, cada `sample_every` pasos y en el instante final.

    Args:
        state (State): Estado inicial.
        n (int | float | RegLevel): Nivel de Yosida del lado derecho.
        cfg (IntegratorConfig): Configuración del integrador.
        until (float): Instante final.
        sample_every (int): Pasos entre muestras.
        observer (callable, optional): Función State -> registro; por defecto `observe`.
        callback (callable, optional): Se invoca como callback(index, sample) tras cada muestra.

    Returns:
        RunResult: Muestras de la integración.

    Raises:
        BlowUpError: Con los registros parciales en su atributo `records`.
    """
    if sample_every < 1:
        raise ConfigurationError("sample_every debe ser >= 1")
    level = RegLevel.parse(n)
    if observer is None:
        def observer(s):
            return observe(s, level, dealias=cfg.dealias, coupling=cfg.coupling)

    start = state.t
    span = abs(until - start)
    direction = 1 if until >= start else -1
    full_steps = int(math.floor(span / cfg.dt + 1e-9))
    remainder = span - full_steps * cfg.dt
    if remainder <= 1e-12 * max(1.0, span):
        remainder = 0.0
    total = full_steps + (1 if remainder > 0 else 0)

    result = RunResult(level)
    logger.info("Integración %s: n = %s, dt = %.3e, pasos = %d, t ∈ [%.4g, %.4g]",
                cfg.scheme, level, cfg.dt, total, start, until)

    def emit(current):
        sample = Sample(current, observer(current))
        result.samples.append(sample)
        logger.debug("muestra t = %.6f", current.t)
        if callback is not None:
            callback(len(result.samples) - 1, sample)

    current = state
    try:
        emit(current)
        for index in range(1, total + 1):
            partial = index > full_steps
            current = step(current, level, cfg, direction, h=remainder if partial else None)
            if not partial:
                # Tiempo por multiplicación para no acumular redondeo
                current = State(current.u, current.v, current.vt, start + direction * index * cfg.dt)
            elif index == total:
                current = State(current.u, current.v, current.vt, until)
            if index % sample_every == 0 or index == total:
                emit(current)
    except BlowUpError as error:
        logger.error("Explosión numérica: %s", error)
        error.records = result.records
        raise
    return result


def run(phi, psi0, psi1, n, cfg, horizon, sample_every=1, mode='strong', callback=None):
    """
    Regulariza los datos y los integra hasta `horizon` emitiendo observables.

    Args:
        phi, psi0, psi1 (Field): Datos iniciales.
        n (int | float | RegLevel): Nivel de Yosida.
        cfg (IntegratorConfig): Configuración del integrador.
        horizon (float): Instante final T >= 0.
        sample_every (int): Pasos entre muestras.
        mode (str): 'strong' o 'finite-energy'.
        callback (callable, optional): Ver run_from_state.

    Returns:
        RunResult: Muestras de la integración.
    """
    if horizon < 0:
        raise ConfigurationError("el horizonte T debe ser >= 0")
    initial = regularized_initial_data(phi, psi0, psi1, n, mode)
    return run_from_state(initial, dynamics_level(n, mode), cfg, horizon, sample_every, callback=callback)


def with_step(cfg, dt):
    """Copia de la configuración con otro paso temporal."""
    return dataclasses.replace(cfg, dt=dt)
