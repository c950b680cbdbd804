"""
Aplicación principal del laboratorio de Klein-Gordon-Schrödinger.
Este archivo integra todos los módulos y expone la línea de comandos con los
subcomandos run, converge, verify y oracle.

Códigos de salida: 0 éxito, 1 validación, 2 fallo numérico, 3 propiedad violada.
"""

import functools
import logging
import math
import os
import sys
import time

import click
import numpy as np
from pydantic import ValidationError
from scipy import fft
from scipy.stats import linregress

from src.config.config import config_hash, format_validation_error, load_config
from src.convergence.convergence import (
    FamilyPlan,
    elliptic_constant_check,
    family_run,
    finite_energy_mode,
    limit_extract,
    yosida_property_suite,
)
from src.data_processing.checkpoint import read_checkpoint, write_checkpoint
from src.data_processing.exporters import (
    RunManifest,
    diff_frame,
    drift_summary,
    read_records_csv,
    records_frame,
    write_diff_csv,
    write_json,
    write_manifest,
    write_records_csv,
)
from src.dynamics.dynamics import dynamics_level, run, run_from_state, with_step
from src.dynamics.initial_data import build_initial_data
from src.dynamics.picard import picard_solve, trajectory_agreement
from src.observables.observables import (
    coercivity_check,
    coercivity_constants,
    envelope_check,
    envelope_fit,
    second_energy_rate_check,
    uniform_h1_bound,
)
from src.spectral.spectral_core import GridSpec, l2_norm, yosida_apply
from src.utils.errors import (
    BlowUpError,
    CheckpointError,
    ConfigurationError,
    GridMismatchError,
    HorizonTooLargeError,
    PropertyViolation,
    SamplingError,
)
from src.utils.utils import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PROPERTY,
    EXIT_VALIDATION,
    TOOL_VERSION,
    configure_logging,
)
from src.visualizations.charts import (
    create_conservation_chart,
    create_diff_chart,
    create_envelope_chart,
    create_norms_chart,
    save_figure,
)

logger = logging.getLogger(__name__)


def _setup(config):
    grid = config.grid.to_grid()
    data = build_initial_data(grid, config.data.family, config.data.params, config.data.seed)
    return grid, data, config.integrator.to_config()


def _finish(manifest, out_dir, started):
    manifest.wall_clock = round(time.perf_counter() - started, 3)
    manifest.artifacts['manifest'] = os.path.join(out_dir, 'manifest.json')
    write_manifest(manifest, out_dir)


def _run_artifacts(records, out_dir, dim, manifest):
    frame = records_frame(records)
    manifest.artifacts['observables'] = write_records_csv(records, os.path.join(out_dir, 'observables.csv'))
    manifest.artifacts['conservation_chart'] = save_figure(
        create_conservation_chart(frame), os.path.join(out_dir, 'conservation.html'))
    manifest.artifacts['norms_chart'] = save_figure(create_norms_chart(frame), os.path.join(out_dir, 'norms.html'))
    if len(records) > 1:
        model = envelope_fit(frame['t'], [r.h2_triple for r in records], dim)
        manifest.artifacts['envelope_chart'] = save_figure(
            create_envelope_chart(frame['t'], [r.h2_triple for r in records], model),
            os.path.join(out_dir, 'envelope.html'))
        return model
    return None


# --- Comandos ---------------------------------------------------------------------------

def cmd_run(config, out_dir, resume=None):
    """
    Ejecuta una trayectoria y escribe CSV, resumen JSON, figuras y checkpoints.

    Returns:
        int: Código de salida.
    """
    started = time.perf_counter()
    manifest = RunManifest('run', config_hash(config))
    grid, (phi, psi0, psi1), cfg = _setup(config)
    level = dynamics_level(config.level, config.mode)
    checkpoint_dir = os.path.join(out_dir, 'checkpoints')
    csv_path = os.path.join(out_dir, 'observables.csv')
    # Número de muestra del estado inicial: 0 salvo al reanudar
    offset = 0

    def on_sample(index, sample):
        number = offset + index
        if config.checkpoint_every and index > 0 and number % config.checkpoint_every == 0:
            path = os.path.join(checkpoint_dir, f'checkpoint_{number:06d}.kgs')
            manifest.artifacts[f'checkpoint_{number:06d}'] = write_checkpoint(path, sample.state, level)

    previous = []
    try:
        if resume:
            state, saved_level = read_checkpoint(resume)
            if state.grid != grid:
                raise GridMismatchError(f"el checkpoint usa la malla {state.grid}, la configuración {grid}")
            if saved_level != level:
                raise ConfigurationError(f"el checkpoint es de n = {saved_level}, la configuración de n = {level}")
            offset = int(round(state.t / (cfg.dt * config.sample_every)))
            if os.path.exists(csv_path):
                # Las filas anteriores al checkpoint se conservan; el resto se reescribe
                previous = [r for r in read_records_csv(csv_path) if r.t < state.t - 0.5 * cfg.dt]
            logger.info("Reanudando desde %s en t = %.6g (muestra %d, %d filas previas)",
                        resume, state.t, offset, len(previous))
            result = run_from_state(state, level, cfg, config.horizon, config.sample_every, callback=on_sample)
        else:
            result = run(phi, psi0, psi1, config.level, cfg, config.horizon, config.sample_every,
                         config.mode, callback=on_sample)
    except BlowUpError as error:
        if error.records:
            manifest.artifacts['observables'] = write_records_csv(previous + list(error.records), csv_path)
        write_json({'blow_up_time': error.t, 'message': str(error), 'passed': False},
                   os.path.join(out_dir, 'summary.json'))
        _finish(manifest, out_dir, started)
        raise

    records = previous + result.records
    series = ([r.t for r in records], [r.h2_triple for r in records])
    model = _run_artifacts(records, out_dir, grid.dim, manifest)
    summary = {
        'n': str(config.level),
        'mode': config.mode,
        'samples': len(records),
        'final': records[-1].as_dict(),
        'drift': drift_summary(records),
        'envelope': None if model is None else {
            'exponent': model.exponent, 'bound_exponent': model.bound_exponent,
            'C': model.C, 'C_prime': model.C_prime, 'passed': envelope_check(model, series),
        },
        'passed': all(record.is_finite() for record in records),
    }
    manifest.artifacts['summary'] = write_json(summary, os.path.join(out_dir, 'summary.json'))
    manifest.passed = summary['passed']
    _finish(manifest, out_dir, started)
    return EXIT_OK if manifest.passed else EXIT_PROPERTY


def cmd_converge(config, out_dir):
    """
    Ejecuta la familia regularizada y escribe el informe de diferencias.

    Returns:
        int: 0 si la tasa L²⊕L²⊕H⁻¹ ajustada alcanza rate_threshold, 3 en otro caso.
    """
    started = time.perf_counter()
    manifest = RunManifest('converge', config_hash(config))
    grid, (phi, psi0, psi1), cfg = _setup(config)
    plan = FamilyPlan(tuple(config.n_list), phi, psi0, psi1, config.horizon, cfg, config.mode,
                      config.sample_every)

    def write_report(result):
        manifest.artifacts['diffs'] = write_diff_csv(result.report, os.path.join(out_dir, 'diffs.csv'))
        if result.report.pairs:
            manifest.artifacts['diff_chart'] = save_figure(
                create_diff_chart(diff_frame(result.report)), os.path.join(out_dir, 'diffs.html'))

    try:
        if config.mode == 'finite-energy':
            result = finite_energy_mode(plan, config.threads, config.lp_ratio_bound)
        else:
            result = family_run(plan, config.threads)
    except BlowUpError as error:
        partial = getattr(error, 'partial', None)
        if partial is not None:
            write_report(partial)
            write_json({'report': partial.report.as_dict(), 'blow_up_time': error.t, 'passed': False},
                       os.path.join(out_dir, 'convergence.json'))
        _finish(manifest, out_dir, started)
        raise

    write_report(result)
    limit = limit_extract(result)
    rate = result.report.rate_l2.rate
    passed = math.isfinite(rate) and rate >= config.rate_threshold
    if result.lp_check is not None:
        passed = passed and result.lp_check.passed
    payload = {
        'report': result.report.as_dict(),
        'rate_threshold': config.rate_threshold,
        'limit': {
            'reference_n': limit.reference_n,
            'deviations': limit.deviations,
            'monotone': limit.monotone,
            'constant': limit.constant,
        },
        'lp_check': None if result.lp_check is None else {
            'ratios': result.lp_check.ratios, 'bound': result.lp_check.bound, 'passed': result.lp_check.passed,
        },
        'passed': passed,
    }
    manifest.artifacts['convergence'] = write_json(payload, os.path.join(out_dir, 'convergence.json'))
    manifest.passed = passed
    _finish(manifest, out_dir, started)
    logger.info("Tasa ajustada %.3f (umbral %.3f): %s", rate, config.rate_threshold,
                'APROBADO' if passed else 'FALLIDO')
    return EXIT_OK if passed else EXIT_PROPERTY


def _suite_yosida(config, context):
    settings = config.verify
    grid = config.grid.to_grid()
    details, passed = {}, True
    for dim in settings.property_dims:
        property_grid = GridSpec.cube(dim, settings.property_modes, grid.lengths[0])
        report = yosida_property_suite(property_grid, settings.property_n_list, config.data.seed,
                                       settings.property_samples, settings.fault_injection)
        details[f'N{dim}'] = report.as_dict()
        passed = passed and report.passed
    deviation, elliptic_ok = elliptic_constant_check(grid, config.data.seed)
    details['elliptic_deviation'] = deviation
    return passed and elliptic_ok, details


def _main_run(config, context):
    if 'run' not in context:
        phi, psi0, psi1 = context['data']
        context['run'] = run(phi, psi0, psi1, config.level, context['cfg'], config.horizon,
                             config.sample_every, 'strong')
    return context['run']


def _suite_conservation(config, context):
    records = _main_run(config, context).records
    drift = drift_summary(records)
    phi = context['data'][0]
    # La carga inicial es ‖J_n²φ‖²
    expected_charge = l2_norm(yosida_apply(phi, config.level, 2)) ** 2
    charge_gap = abs(records[0].Q - expected_charge) / max(expected_charge, 1e-300)
    passed = (drift['Q_drift'] <= config.verify.conservation_q_tolerance
              and drift['En_drift'] <= config.verify.conservation_e_tolerance
              and charge_gap <= 1e-12)
    return passed, {**drift, 'initial_charge_gap': charge_gap}


def _suite_rate(config, context):
    settings = config.verify
    phi, psi0, psi1 = context['data']
    mismatches, relative = [], []
    for dt in settings.rate_dt_levels:
        cfg = with_step(context['cfg'], dt)
        # Horizonte múltiplo exacto de dt: muestras equiespaciadas
        steps = max(4, int(round(settings.rate_horizon / dt)))
        states = run(phi, psi0, psi1, config.level, cfg, steps * dt, 1, 'strong').states
        report = second_energy_rate_check(states, config.level, cfg.dealias, cfg.coupling)
        mismatches.append(report.max_mismatch)
        relative.append(report.relative_mismatch)
    details = {'dt': settings.rate_dt_levels, 'max_mismatch': mismatches, 'relative_mismatch': relative}
    if max(relative) <= 1e-10:
        # Desajuste en el nivel de redondeo: no hay orden que medir
        details['slope'] = None
        return True, details
    fit = linregress(np.log(settings.rate_dt_levels), np.log(np.maximum(mismatches, 1e-300)))
    details['slope'] = float(fit.slope)
    return abs(fit.slope - 2.0) <= settings.rate_order_slack, details


def _suite_envelope(config, context):
    # Horizonte propio: la cota de crecimiento es asintótica en T
    phi, psi0, psi1 = context['data']
    records = run(phi, psi0, psi1, config.level, context['cfg'], config.verify.envelope_horizon,
                  config.sample_every, 'strong').records
    if len(records) < 2:
        return True, {'exponent': 0.0, 'note': 'serie degenerada'}
    series = ([r.t for r in records], [r.h2_triple for r in records])
    model = envelope_fit(*series, config.grid.dim)
    passed = envelope_check(model, series)
    return passed, {'exponent': model.exponent, 'bound_exponent': model.bound_exponent,
                    'C': model.C, 'C_prime': model.C_prime}


def _suite_coercivity(config, context):
    if context['cfg'].coupling != 1.0:
        return True, {'skipped': 'la cota de coercividad supone acoplamiento unitario'}
    records = _main_run(config, context).records
    constants = coercivity_constants(config.grid.dim, config.verify.gn_ensemble, config.data.seed)
    phi_l2 = l2_norm(context['data'][0])
    slacks = [coercivity_check(record, phi_l2, constants) for record in records]
    bound = uniform_h1_bound(records[0], phi_l2, constants)
    worst_triple = max(record.h1_triple for record in records)
    passed = min(slacks) >= 0 and worst_triple <= bound
    return passed, {'min_slack': min(slacks), 'h1_bound': bound, 'max_h1_triple': worst_triple,
                    'constants': {str(p): c for p, c in constants.values.items()}}


SUITES = {
    'yosida': _suite_yosida,
    'conservation': _suite_conservation,
    'rate': _suite_rate,
    'envelope': _suite_envelope,
    'coercivity': _suite_coercivity,
}


def cmd_verify(config, out_dir):
    """
    Ejecuta las suites de propiedades seleccionadas y agrega un veredicto.

    Returns:
        int: 0 si todas pasan, 3 si alguna falla.
    """
    started = time.perf_counter()
    manifest = RunManifest('verify', config_hash(config))
    grid, data, cfg = _setup(config)
    context = {'data': data, 'cfg': cfg}
    results = {}
    for name in config.verify.suites:
        passed, details = SUITES[name](config, context)
        results[name] = {'passed': passed, 'details': details}
        logger.info("Suite %-12s %s", name, 'APROBADA' if passed else 'FALLIDA')
    manifest.passed = all(result['passed'] for result in results.values())
    manifest.artifacts['verify'] = write_json({'suites': results, 'passed': manifest.passed},
                                              os.path.join(out_dir, 'verify.json'))
    _finish(manifest, out_dir, started)
    if not manifest.passed:
        failing = [name for name, result in results.items() if not result['passed']]
        raise PropertyViolation(f"suites fallidas: {failing}")
    return EXIT_OK


def cmd_oracle(config, out_dir):
    """
    Compara la solución de Picard de las ecuaciones integrales con el integrador.

    Returns:
        int: 0 si la distancia sup-en-tiempo no supera oracle.tolerance, 3 en otro caso.
    """
    started = time.perf_counter()
    manifest = RunManifest('oracle', config_hash(config))
    grid, (phi, psi0, psi1), cfg = _setup(config)
    settings = config.oracle
    intervals = max(2, int(math.ceil(settings.horizon / settings.dt - 1e-9)))
    step = settings.horizon / intervals
    picard = picard_solve(phi, psi0, psi1, config.level, settings.horizon, settings.tol, step,
                          cfg.dealias, cfg.coupling, settings.max_sweeps)
    stepped = run(phi, psi0, psi1, config.level, with_step(cfg, step), settings.horizon, 1, 'strong')
    agreement = trajectory_agreement(picard, stepped)
    manifest.passed = agreement <= settings.tolerance
    payload = {
        'agreement': agreement,
        'tolerance': settings.tolerance,
        'sweeps': picard.sweeps,
        'increments': picard.increments,
        'dt': step,
        'passed': manifest.passed,
    }
    manifest.artifacts['oracle'] = write_json(payload, os.path.join(out_dir, 'oracle.json'))
    _finish(manifest, out_dir, started)
    logger.info("Oráculo: distancia %.3e (tolerancia %.1e)", agreement, settings.tolerance)
    return EXIT_OK if manifest.passed else EXIT_PROPERTY


# --- Línea de comandos ------------------------------------------------------------------

def common_options(func):
    """Opciones compartidas por todos los subcomandos."""
    @click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                  help='Archivo JSON del experimento.')
    @click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
                  help='Directorio de salida (sustituye output_dir).')
    @click.option('--seed', type=click.IntRange(min=0), default=None, help='Semilla (sustituye data.seed).')
    @click.option('--threads', type=click.IntRange(min=1), default=None,
                  help='Hilos de trabajo; no alteran los resultados.')
    @click.option('--verbose', is_flag=True, help='Registro en nivel DEBUG.')
    @functools.wraps(func)
    def wrapper(config_path, out_dir, seed, threads, verbose, **kwargs):
        configure_logging(verbose)
        return func(config_path=config_path, out_dir=out_dir, seed=seed, threads=threads, **kwargs)
    return wrapper


def _dispatch(command, config_path, out_dir, seed, threads, **kwargs):
    try:
        config = load_config(config_path, seed=seed, output_dir=out_dir, threads=threads)
        target = config.output_dir
        os.makedirs(target, exist_ok=True)
        logger.info("Comando %s: configuración %s, salida en %s", command.__name__, config_hash(config)[:12], target)
        with fft.set_workers(config.threads):
            code = command(config, target, **kwargs)
    except ValidationError as error:
        for line in format_validation_error(error):
            click.echo(f"Error de configuración: {line}", err=True)
        code = EXIT_VALIDATION
    except (ConfigurationError, GridMismatchError, CheckpointError, SamplingError) as error:
        click.echo(f"Error de validación: {error}", err=True)
        code = EXIT_VALIDATION
    except (BlowUpError, HorizonTooLargeError) as error:
        click.echo(f"Fallo numérico: {error}", err=True)
        code = EXIT_NUMERICAL
    except PropertyViolation as error:
        click.echo(f"Propiedad violada: {error}", err=True)
        code = EXIT_PROPERTY
    sys.exit(code)


@click.group()
@click.version_option(TOOL_VERSION)
def cli():
    """Simulador pseudoespectral y laboratorio de verificación de Klein-Gordon-Schrödinger."""


@cli.command('run')
@common_options
@click.option('--resume', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Checkpoint desde el que continuar la trayectoria.')
def run_command(resume, **options):
    """Integra una trayectoria y emite los observables."""
    _dispatch(cmd_run, resume=resume, **options)


@cli.command('converge')
@common_options
def converge_command(**options):
    """Ejecuta la familia regularizada y ajusta la tasa de Cauchy."""
    _dispatch(cmd_converge, **options)


@cli.command('verify')
@common_options
def verify_command(**options):
    """Ejecuta las suites de propiedades."""
    _dispatch(cmd_verify, **options)


@cli.command('oracle')
@common_options
def oracle_command(**options):
    """Valida el integrador contra la iteración de Picard."""
    _dispatch(cmd_oracle, **options)
