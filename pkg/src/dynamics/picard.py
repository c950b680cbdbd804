"""
Módulo del oráculo de Picard.
Resuelve las ecuaciones integrales de Duhamel del sistema regularizado
    u(t) = U(t)u₀ + i∫₀ᵗ U(t-s) J_n²(J_n²v·J_n²u)(s) ds,
    v(t) = K̇(t)v₀ + K(t)v₁ + ∫₀ᵗ K(t-s) J_n²|J_n²u|²(s) ds,
por iteración de punto fijo sobre trayectorias muestreadas, con cuadratura de
Simpson acumulada en tiempo. Sirve de validación cruzada independiente del integrador.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from src.dynamics.dynamics import regularized_initial_data
from src.dynamics.state import RegLevel, State
from src.spectral.spectral_core import density_coefficients, product_coefficients, yosida_values
from src.utils.errors import ConfigurationError, HorizonTooLargeError

logger = logging.getLogger(__name__)

# Barridos consecutivos con incremento creciente que se interpretan como no contracción
GROWTH_PATIENCE = 3


@dataclass(frozen=True, eq=False)
class PicardResult:
    """
    Trayectoria convergida del punto fijo.

    Attributes:
        grid (GridSpec): Malla espectral.
        level (RegLevel): Nivel de Yosida.
        times (numpy.ndarray): Instantes de muestreo (equiespaciados desde 0).
        u, v, vt (numpy.ndarray): Coeficientes con forma (len(times), *grid.modes).
        sweeps (int): Barridos realizados.
        increments (list): Incremento sup-en-tiempo de cada barrido.
    """
    grid: object
    level: RegLevel
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    sweeps: int
    increments: list

    def state_at(self, index):
        return State.from_arrays(self.grid, self.u[index], self.v[index], self.vt[index], self.times[index])


def _cumulative(values, times):
    # cumulative_simpson sobre partes real e imaginaria por separado
    if np.iscomplexobj(values):
        return _cumulative(values.real, times) + 1j * _cumulative(values.imag, times)
    return cumulative_simpson(values, x=times, axis=0, initial=0)


def _sup_l2(du, dv, dvt):
    axes = tuple(range(1, du.ndim))
    total = np.sum(np.abs(du) ** 2, axis=axes) + np.sum(dv ** 2, axis=axes) + np.sum(dvt ** 2, axis=axes)
    return float(np.sqrt(total.max()))


def picard_solve(phi, psi0, psi1, n, horizon, tol=1e-10, dt=1e-3, dealias=True, coupling=1.0,
                 max_sweeps=50):
    """
    Iteración de Picard de las ecuaciones integrales en [0, T].

    La primera iterada es el flujo lineal; cada barrido evalúa los términos de
    interacción a lo largo de toda la trayectoria y recalcula las integrales de Duhamel.

    Args:
        phi, psi0, psi1 (Field): Datos iniciales (se regularizan con J_n²).
        n (int | float | RegLevel): Nivel de Yosida.
        horizon (float): Horizonte T >= 0.
        tol (float): Tolerancia del incremento sup-en-tiempo en L².
        dt (float): Espaciado temporal de la trayectoria muestreada.
        dealias (bool): Productos en la malla refinada.
        coupling (float): Intensidad del acoplamiento.
        max_sweeps (int): Número máximo de barridos.

    Returns:
        PicardResult: Trayectoria convergida.

    Raises:
        HorizonTooLargeError: Si el incremento crece en tres barridos seguidos,
            deja de ser finito o no baja de tol en max_sweeps barridos.
    """
    if horizon < 0 or not math.isfinite(horizon):
        raise ConfigurationError("el horizonte de Picard debe ser finito y >= 0")
    if dt <= 0 or tol <= 0:
        raise ConfigurationError("dt y tol deben ser positivos")
    level = RegLevel.parse(n)
    data = regularized_initial_data(phi, psi0, psi1, level)
    grid = data.grid

    if horizon == 0:
        times = np.zeros(1)
    else:
        # Simpson necesita al menos tres nodos temporales
        intervals = max(2, int(math.ceil(horizon / dt - 1e-9)))
        times = np.linspace(0.0, horizon, intervals + 1)

    tt = times.reshape((-1,) + (1,) * grid.dim)
    lam = grid.eigenvalues
    omega = np.sqrt(1.0 + lam)
    phase = np.exp(-1j * lam * tt)
    cos_t = np.cos(omega * tt)
    sin_t = np.sin(omega * tt)

    u0, v0, vt0 = data.arrays()
    linear_u = phase * u0
    linear_v = cos_t * v0 + sin_t / omega * vt0
    linear_vt = cos_t * vt0 - omega * sin_t * v0
    j2 = yosida_values(grid, level, 2)

    u, v, vt = linear_u, linear_v, linear_vt
    increments = []
    for sweep in range(1, max_sweeps + 1):
        if len(times) == 1 or coupling == 0:
            new_u, new_v, new_vt = linear_u, linear_v, linear_vt
        else:
            ju = j2 * u
            coupled = coupling * j2 * product_coefficients(j2 * v, ju, grid, dealias)
            source = coupling * j2 * density_coefficients(ju, grid, dealias)
            new_u = phase * (u0 + 1j * _cumulative(np.conj(phase) * coupled, times))
            # ∫K(t-s)f = ω⁻¹[sin tω ∫cos sω f - cos tω ∫sin sω f]
            int_cos = _cumulative(cos_t * source, times)
            int_sin = _cumulative(sin_t * source, times)
            new_v = linear_v + (sin_t * int_cos - cos_t * int_sin) / omega
            new_vt = linear_vt + cos_t * int_cos + sin_t * int_sin

        increment = _sup_l2(new_u - u, new_v - v, new_vt - vt)
        u, v, vt = new_u, new_v, new_vt
        increments.append(increment)
        logger.debug("Picard barrido %d: incremento %.3e", sweep, increment)

        if not math.isfinite(increment):
            raise HorizonTooLargeError("la iteración de Picard produjo valores no finitos", increments)
        if increment < tol:
            logger.info("Picard convergió en %d barridos (T = %.4g)", sweep, horizon)
            return PicardResult(grid, level, times, u, v, vt, sweep, increments)
        recent = increments[-(GROWTH_PATIENCE + 1):]
        if len(recent) == GROWTH_PATIENCE + 1 and all(b > a for a, b in zip(recent, recent[1:])):
            logger.error("Picard no contrae: incrementos %s", recent)
            raise HorizonTooLargeError(
                f"el incremento creció {GROWTH_PATIENCE} barridos seguidos; reduzca T = {horizon:.4g}",
                increments,
            )

    raise HorizonTooLargeError(f"sin convergencia tras {max_sweeps} barridos (T = {horizon:.4g})", increments)


def trajectory_agreement(picard, run_result):
    """
    Máxima distancia L² (u, v, ∂_t v combinados) entre Picard y el integrador
    en los instantes comunes.

    Args:
        picard (PicardResult): Trayectoria de Picard.
        run_result (RunResult): Integración muestreada con el mismo espaciado.

    Returns:
        float: Distancia sup-en-tiempo sobre los instantes coincidentes.
    """
    times, u, v, vt = run_result.stacked()
    matches = []
    for i, t in enumerate(times):
        j = int(np.argmin(np.abs(picard.times - t)))
        if abs(picard.times[j] - t) <= 1e-9 * max(1.0, abs(t)):
            matches.append((i, j))
    if not matches:
        raise ConfigurationError("las trayectorias no comparten instantes de muestreo")
    rows, cols = (list(index) for index in zip(*matches))
    return _sup_l2(picard.u[cols] - u[rows], picard.v[cols] - v[rows], picard.vt[cols] - vt[rows])
