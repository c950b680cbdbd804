"""
Módulo de convergencia de la familia regularizada.
Contiene la suite de desigualdades exactas de la aproximación de Yosida, la
ejecución concurrente de la familia de soluciones sobre una lista de niveles n,
las diferencias de Cauchy con ajuste de tasa, la extracción del límite y el modo
de datos de energía finita.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft
from scipy.stats import linregress

from src.dynamics.dynamics import run
from src.dynamics.initial_data import rough_field
from src.dynamics.state import IntegratorConfig, RegLevel
from src.spectral.spectral_core import (
    Field,
    Multiplier,
    elliptic_constant,
    l2_norm,
    lp_norm,
    sobolev_norm,
    yosida_values,
)
from src.utils.errors import BlowUpError, ConfigurationError, GridMismatchError, PropertyViolation

logger = logging.getLogger(__name__)

DATA_MODES = ('strong', 'finite-energy')

LP_EXPONENTS = (2, 4, 8, 16, 32)

# Nivel de confianza del intervalo de la tasa (normal, 95 %)
CI_Z = 1.96

MONOTONE_TOLERANCE = 0.10

PROPERTY_CHECKS = ('contraction', 'gradient', 'laplacian', 'cauchy')

# Campos aleatorios por lote de la suite de Yosida
PROPERTY_CHUNK = 128


# --- Suite de propiedades de Yosida -------------------------------------------------------

@dataclass
class CheckResult:
    """Resultado de una desigualdad: peor cociente LHS/RHS, modo que lo alcanza y violaciones."""
    name: str
    worst_ratio: float = 0.0
    worst_mode: Optional[tuple] = None
    worst_n: Optional[tuple] = None
    violations: int = 0

    def batch(self, lhs, rhs, where):
        """Comparación por lotes: LHS y RHS con forma (muestras, columnas); `where` etiqueta cada columna."""
        lhs, rhs = np.broadcast_arrays(lhs, rhs)
        if lhs.size == 0:
            return
        # Comparación exacta, sin tolerancia
        self.violations += int(np.count_nonzero(lhs > rhs))
        ratio = np.divide(lhs, rhs, out=np.where(lhs > 0, math.inf, 0.0), where=rhs > 0)
        flat = int(np.argmax(ratio))
        if ratio.flat[flat] > self.worst_ratio:
            self.worst_ratio = float(ratio.flat[flat])
            label = where[np.unravel_index(flat, ratio.shape)[-1]]
            self.worst_n = tuple(label) if isinstance(label, tuple) else (label,)
            self.worst_mode = None

    def scan(self, grid, lhs, rhs, where):
        """Barrido por modos propios normalizados: LHS y RHS son arreglos por modo."""
        lhs, rhs = np.broadcast_arrays(lhs, rhs)
        ratio = np.divide(lhs, rhs, out=np.zeros(lhs.shape), where=rhs > 0)
        flat = int(np.argmax(ratio))
        self.violations += int(np.count_nonzero(lhs > rhs))
        if ratio.flat[flat] > self.worst_ratio:
            self.worst_ratio = float(ratio.flat[flat])
            self.worst_n = where
            self.worst_mode = _mode_index(grid, flat)


@dataclass
class PropertyReport:
    """Informe de la suite de desigualdades de Yosida."""
    checks: dict
    samples: int
    fault: float = 0.0

    @property
    def passed(self):
        return all(check.violations == 0 for check in self.checks.values())

    def as_dict(self):
        return {
            'passed': self.passed,
            'samples': self.samples,
            'fault': self.fault,
            'checks': {
                name: {
                    'worst_ratio': check.worst_ratio,
                    'worst_mode': list(check.worst_mode) if check.worst_mode else None,
                    'worst_n': list(check.worst_n) if check.worst_n else None,
                    'violations': check.violations,
                }
                for name, check in self.checks.items()
            },
        }


def _mode_index(grid, flat):
    return tuple(int(i) + 1 for i in np.unravel_index(int(flat), grid.modes))


def _yosida(grid, n, fault):
    return yosida_values(grid, n, 1) * (1.0 + fault)


def _sample_power(grid, seed, samples, decay=None):
    """Lotes de |f̂_k|² de campos H¹ aleatorios, con forma (lote, número de modos)."""
    decay = (1.5 + grid.dim / 2) / 2 if decay is None else decay
    rng = np.random.default_rng(seed)
    weights = ((1.0 + grid.eigenvalues) ** (-2 * decay)).ravel()
    for start in range(0, samples, PROPERTY_CHUNK):
        draws = rng.standard_normal((min(PROPERTY_CHUNK, samples - start), weights.size))
        yield draws * draws * weights


def yosida_norm_table(grid, power, levels, fault=0.0):
    """
    Normas de todos los campos de un lote para todos los niveles a la vez.

    Cada norma ponderada es una columna de una única matriz de pesos, de modo que
    el lote completo se evalúa con un producto matriz por matriz.

    Args:
        grid (GridSpec): Malla espectral.
        power (np.ndarray): |f̂_k|² con forma (S, *modos) o (S, número de modos).
        levels (sequence): Niveles n finitos en orden creciente.
        fault (float): Perturbación relativa del multiplicador.

    Returns:
        dict: 'l2' y 'gradient' con forma (S,); 'smoothed_l2', 'smoothed_gradient' y
            'smoothed_laplacian' con forma (S, niveles); 'gap_l2' con forma (S, pares)
            para los pares (m, n) de 'pairs', m > n.
    """
    lam = grid.eigenvalues.ravel()
    power = np.asarray(power, dtype=float).reshape(len(power), lam.size)
    js = {n: _yosida(grid, n, fault).ravel() for n in levels}
    squared = [js[n] ** 2 for n in levels]
    pairs = [(m, n) for i, n in enumerate(levels) for m in levels[i + 1:]]
    gaps = [(js[m] - js[n]) ** 2 for m, n in pairs]
    columns = ([np.ones_like(lam), lam] + squared + [lam * j2 for j2 in squared]
               + [lam ** 2 * j2 for j2 in squared] + gaps)
    sums = power @ np.stack(columns, axis=1)
    norms = np.sqrt(np.maximum(sums, 0.0))
    count = len(levels)
    return {
        'l2': norms[:, 0],
        'gradient': norms[:, 1],
        'smoothed_l2': norms[:, 2:2 + count],
        'smoothed_gradient': norms[:, 2 + count:2 + 2 * count],
        'smoothed_laplacian': norms[:, 2 + 2 * count:2 + 3 * count],
        'gap_l2': norms[:, 2 + 3 * count:],
        'pairs': pairs,
    }


def yosida_property_suite(grid, n_list, seed=0, samples=1000, fault=0.0, strict=False):
    """
    Verifica las cuatro desigualdades de J_n = (I - Δ/n)⁻¹ sin tolerancia:
        ‖J_n u‖ ≤ ‖u‖,  ‖∇J_n u‖ ≤ n^{1/2}‖u‖,  ‖ΔJ_n u‖ ≤ n‖u‖,
        ‖(J_m - J_n)u‖ ≤ n^{-1/2}‖∇u‖  (m > n).

    Se evalúan sobre cada modo propio (barrido por modos, que identifica el modo
    más desfavorable) y sobre `samples` campos aleatorios H¹ sembrados, procesados
    por lotes de PROPERTY_CHUNK campos.

    Args:
        grid (GridSpec): Malla espectral.
        n_list (sequence): Niveles de Yosida (enteros positivos).
        seed (int): Semilla de los campos aleatorios.
        samples (int): Número de campos aleatorios.
        fault (float): Perturbación relativa del multiplicador (prueba de sensibilidad).
        strict (bool): Lanzar PropertyViolation ante cualquier violación.

    Returns:
        PropertyReport: Peor cociente por desigualdad y número de violaciones.
    """
    levels = sorted({int(RegLevel.parse(n).n) for n in n_list if not RegLevel.parse(n).is_infinite})
    if not levels:
        raise ConfigurationError("la suite requiere al menos un nivel n finito")
    checks = {name: CheckResult(name) for name in PROPERTY_CHECKS}
    lam = grid.eigenvalues
    roots = np.sqrt(np.array(levels, dtype=float))

    for n in levels:
        j_n = _yosida(grid, n, fault)
        # Barrido por modos: cada autofunción de norma 1
        checks['contraction'].scan(grid, j_n, 1.0, (n,))
        checks['gradient'].scan(grid, np.sqrt(lam) * j_n, math.sqrt(n), (n,))
        checks['laplacian'].scan(grid, lam * j_n, float(n), (n,))
    for i, n in enumerate(levels):
        for m in levels[i + 1:]:
            gap = np.abs(_yosida(grid, m, fault) - _yosida(grid, n, fault))
            checks['cauchy'].scan(grid, gap, np.sqrt(lam / n), (m, n))

    for power in _sample_power(grid, seed, samples):
        table = yosida_norm_table(grid, power, levels, fault)
        base = table['l2'][:, None]
        checks['contraction'].batch(table['smoothed_l2'], base, levels)
        checks['gradient'].batch(table['smoothed_gradient'], roots * base, levels)
        checks['laplacian'].batch(table['smoothed_laplacian'], np.array(levels, dtype=float) * base, levels)
        lower = np.array([math.sqrt(n) for _, n in table['pairs']])
        checks['cauchy'].batch(table['gap_l2'], table['gradient'][:, None] / lower, table['pairs'])

    report = PropertyReport(checks, samples, fault)
    for check in checks.values():
        logger.info("Yosida %-12s peor cociente %.6f (n = %s, modo %s), violaciones %d",
                    check.name, check.worst_ratio, check.worst_n, check.worst_mode, check.violations)
    if strict and not report.passed:
        failing = [name for name, check in checks.items() if check.violations]
        raise PropertyViolation(f"desigualdades de Yosida violadas: {failing}")
    return report


def elliptic_constant_check(grid, seed=0, samples=16, tolerance=1e-12):
    """Desviación máxima de ‖f‖_{H²}/‖(I-Δ)f‖₂ respecto de 1 sobre campos aleatorios."""
    deviation = max(abs(elliptic_constant(rough_field(grid, seed + i)) - 1.0) for i in range(samples))
    return deviation, deviation <= tolerance


# --- Familia regularizada ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FamilyPlan:
    """
    Plan de ejecución de la familia {u_n}.

    Args:
        n_list (tuple): Niveles estrictamente crecientes (al menos 3).
        phi, psi0, psi1 (Field): Datos compartidos.
        horizon (float): Horizonte T.
        cfg (IntegratorConfig): Integrador común.
        mode (str): 'strong' o 'finite-energy'.
        sample_every (int): Pasos entre muestras.
        include_infinity (bool): Añadir la ejecución n = ∞ como referencia del límite.
    """
    n_list: tuple
    phi: Field
    psi0: Field
    psi1: Field
    horizon: float
    cfg: IntegratorConfig = IntegratorConfig()
    mode: str = 'strong'
    sample_every: int = 10
    include_infinity: bool = True

    def __post_init__(self):
        levels = tuple(int(RegLevel.parse(n).n) if not RegLevel.parse(n).is_infinite else None
                       for n in self.n_list)
        if None in levels:
            raise ConfigurationError("n_list solo admite niveles finitos; use include_infinity")
        if len(levels) < 3:
            raise ConfigurationError(f"n_list requiere al menos 3 niveles (recibidos {len(levels)})")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigurationError("n_list debe ser estrictamente creciente")
        if self.mode not in DATA_MODES:
            raise ConfigurationError(f"modo desconocido {self.mode!r}")
        if self.horizon < 0:
            raise ConfigurationError("el horizonte T debe ser >= 0")
        object.__setattr__(self, 'n_list', levels)

    @property
    def members(self):
        return self.n_list + ((math.inf,) if self.include_infinity else ())


@dataclass(frozen=True)
class PairDiff:
    """Diferencias sup-en-tiempo entre dos miembros de la familia."""
    m: float
    n: float
    h1_diff: float
    l2_diff: float
    initial_h1_diff: float
    initial_l2_diff: float


@dataclass(frozen=True)
class RateFit:
    """Tasa de decaimiento ajustada diff ~ C·n^{-rate} con intervalo de confianza."""
    rate: float
    stderr: float
    intercept: float

    @property
    def ci(self):
        return self.rate - CI_Z * self.stderr, self.rate + CI_Z * self.stderr


@dataclass
class DiffReport:
    """Informe de diferencias de Cauchy entre miembros consecutivos."""
    mode: str
    pairs: list
    rate_h1: RateFit
    rate_l2: RateFit

    def as_dict(self):
        return {
            'mode': self.mode,
            'pairs': [vars(pair) for pair in self.pairs],
            'rate_h1': {'rate': self.rate_h1.rate, 'stderr': self.rate_h1.stderr, 'ci': list(self.rate_h1.ci)},
            'rate_l2': {'rate': self.rate_l2.rate, 'stderr': self.rate_l2.stderr, 'ci': list(self.rate_l2.ci)},
        }


@dataclass
class FamilyResult:
    """Ejecuciones de la familia (ordenadas por n) e informe de diferencias."""
    plan: FamilyPlan
    runs: dict
    report: DiffReport
    lp_check: Optional[object] = None
    reference: Optional[object] = field(default=None)


def _triples(u, v, vt):
    """Normas (H¹⊕H¹⊕L², L²⊕L²⊕H⁻¹) de una diferencia, como sumas de componentes."""
    strong = sobolev_norm(u, 1) + sobolev_norm(v, 1) + l2_norm(vt)
    weak = l2_norm(u) + l2_norm(v) + sobolev_norm(vt, -1)
    return strong, weak


def state_difference(a, b):
    """Normas triples de la diferencia entre dos estados."""
    return _triples(a.u - b.u, a.v - b.v, a.vt - b.vt)


def pair_difference(run_m, run_n, m, n):
    """
    Diferencias sup-en-tiempo entre dos ejecuciones con los mismos instantes de muestreo.

    Raises:
        GridMismatchError: Si los instantes de muestreo no coinciden.
    """
    states_m, states_n = run_m.states, run_n.states
    if len(states_m) != len(states_n) or not np.allclose(run_m.times, run_n.times, rtol=0, atol=1e-12):
        raise GridMismatchError("las ejecuciones no comparten instantes de muestreo")
    diffs = np.array([state_difference(a, b) for a, b in zip(states_m, states_n)])
    return PairDiff(float(m), float(n), float(diffs[:, 0].max()), float(diffs[:, 1].max()),
                    float(diffs[0, 0]), float(diffs[0, 1]))


def fit_rate(levels, diffs):
    """
    Ajuste log-log de diff frente a n con scipy.stats.linregress.

    Returns:
        RateFit: rate = -pendiente; NaN si hay menos de dos diferencias positivas.
    """
    levels = np.asarray(levels, dtype=float)
    diffs = np.asarray(diffs, dtype=float)
    usable = diffs > 0
    if np.count_nonzero(usable) < 2:
        return RateFit(math.nan, math.nan, math.nan)
    fit = linregress(np.log(levels[usable]), np.log(diffs[usable]))
    return RateFit(float(-fit.slope), float(fit.stderr), float(fit.intercept))


def _member_run(plan, n, threads):
    with fft.set_workers(threads):
        return run(plan.phi, plan.psi0, plan.psi1, n, plan.cfg, plan.horizon, plan.sample_every, plan.mode)


def build_report(plan, runs):
    """Diferencias entre miembros finitos consecutivos y tasas ajustadas (diff atribuida al n menor)."""
    finite = [n for n in plan.n_list if n in runs]
    pairs = [pair_difference(runs[a], runs[b], a, b) for a, b in zip(finite, finite[1:])]
    smaller = [pair.m for pair in pairs]
    return DiffReport(
        mode=plan.mode,
        pairs=pairs,
        rate_h1=fit_rate(smaller, [pair.h1_diff for pair in pairs]),
        rate_l2=fit_rate(smaller, [pair.l2_diff for pair in pairs]),
    )


def family_run(plan, threads=1):
    """
    Ejecuta todos los miembros de la familia (concurrentemente) y compara los consecutivos.

    Los resultados se pliegan en orden de n, de modo que el informe no depende del
    número de hilos.

    Args:
        plan (FamilyPlan): Plan de la familia.
        threads (int): Hilos del pool (y trabajadores de scipy.fft).

    Returns:
        FamilyResult: Ejecuciones por n e informe de diferencias.

    Raises:
        BlowUpError: Si un miembro explota; `error.partial` contiene el FamilyResult parcial.
    """
    threads = max(1, int(threads))
    members = plan.members
    logger.info("Familia %s: n = %s, T = %.4g, hilos = %d", plan.mode, members, plan.horizon, threads)
    workers = max(1, threads // len(members))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {n: pool.submit(_member_run, plan, n, workers) for n in members}
    runs, failure = {}, None
    for n in members:
        try:
            runs[n] = futures[n].result()
        except BlowUpError as error:
            logger.error("El miembro n = %s explotó en t = %.6g", n, error.t)
            failure = failure or error
    report = build_report(plan, runs)
    result = FamilyResult(plan, runs, report, reference=runs.get(math.inf))
    if failure is not None:
        failure.partial = result
        raise failure
    for pair in report.pairs:
        logger.info("diff(%d, %d): H¹ %.3e, L² %.3e", pair.m, pair.n, pair.h1_diff, pair.l2_diff)
    return result


@dataclass(frozen=True)
class LimitReport:
    """Desviación de cada miembro respecto de la referencia del límite."""
    reference_n: float
    deviations: dict
    monotone: bool
    constant: float


def limit_extract(family):
    """
    Compara cada miembro con la referencia (ejecución n = ∞ o, en su defecto, el mayor n).

    La desviación es el sup en tiempo de ‖δu‖_{H¹} + ‖δv‖_{H¹} + ‖δ∂_t v‖₂; la tendencia
    se considera monótona si cada desviación no supera en más de un 10 % a la anterior.

    Returns:
        LimitReport: Desviaciones por n, monotonía y constante C de C·n^{-1/2}.
    """
    reference_n = math.inf if math.inf in family.runs else max(family.runs)
    reference = family.runs[reference_n]
    deviations = {}
    for n in sorted(family.runs):
        if n == reference_n:
            continue
        deviations[n] = pair_difference(family.runs[n], reference, n, reference_n).h1_diff
    values = [deviations[n] for n in sorted(deviations)]
    monotone = all(b <= (1 + MONOTONE_TOLERANCE) * a for a, b in zip(values, values[1:]))
    scaled = [deviations[n] * math.sqrt(n) for n in deviations if math.isfinite(n)]
    constant = float(np.median(scaled)) if scaled else 0.0
    return LimitReport(reference_n, deviations, monotone, constant)


@dataclass(frozen=True)
class LpGrowthReport:
    """Cocientes ‖u‖_p/(√p‖u‖_{H¹}) máximos por exponente y veredicto frente a la cota."""
    ratios: dict
    bound: float

    @property
    def passed(self):
        return all(ratio <= self.bound for ratio in self.ratios.values())


def lp_growth_check(fields, ps=LP_EXPONENTS, bound=1.0, refine=2):
    """
    Comprueba que ‖u‖_p/(√p‖u‖_{H¹}) permanece acotado para p ∈ {2, ..., 32}.

    Args:
        fields (iterable): Campos a evaluar.
        ps (sequence): Exponentes p.
        bound (float): Cota admitida.
        refine (int): Refinamiento de la cuadratura L^p.
    """
    ratios = {}
    for p in ps:
        worst = 0.0
        for f in fields:
            h1 = sobolev_norm(f, 1)
            if h1 == 0:
                continue
            lp = l2_norm(f) if p == 2 else lp_norm(f, p, refine)
            worst = max(worst, lp / (math.sqrt(p) * h1))
        ratios[p] = worst
    return LpGrowthReport(ratios, bound)


def finite_energy_mode(plan, threads=1, lp_ratio_bound=1.0):
    """
    Familia con datos (J_nφ, J_nψ₀, J_nψ₁) y no linealidad verdadera.

    En dimensión 2 añade la comprobación de crecimiento L^p sobre el dato φ y el
    estado final del mayor n.

    Returns:
        FamilyResult: Con `lp_check` relleno en N = 2.
    """
    if plan.mode != 'finite-energy':
        raise ConfigurationError("finite_energy_mode requiere un plan con mode='finite-energy'")
    result = family_run(plan, threads)
    if plan.phi.grid.dim == 2:
        largest = result.runs[plan.n_list[-1]].final_state
        result.lp_check = lp_growth_check([plan.phi, largest.u], bound=lp_ratio_bound)
        logger.info("Crecimiento L^p: %s", result.lp_check.ratios)
    return result


def yosida_gap(grid, m, n, power=2):
    """Multiplicador J_m^power - J_n^power; da las diferencias en t = 0 del modo fuerte."""
    return Multiplier(grid, yosida_values(grid, m, power) - yosida_values(grid, n, power))
