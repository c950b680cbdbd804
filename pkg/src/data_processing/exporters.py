"""
Módulo para la exportación de resultados.
Contiene funciones para convertir registros de observables en DataFrames y
escribir los artefactos de un experimento (CSV, JSON y manifiesto).
"""

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.observables.observables import CSV_COLUMNS, ObsRecord
from src.utils.errors import CheckpointError
from src.utils.utils import TOOL_VERSION

logger = logging.getLogger(__name__)

# Formato con precisión de ida y vuelta para floats de 8 bytes
FLOAT_FORMAT = '%.17g'

DIFF_COLUMNS = ('m', 'n', 'h1_diff', 'l2_diff', 'initial_h1_diff', 'initial_l2_diff')


def records_frame(records):
    """
    Convierte una lista de ObsRecord en un DataFrame con las columnas del CSV.

    Args:
        records (list): Registros de observables.

    Returns:
        pandas.DataFrame: Una fila por registro, columnas en el orden documentado.
    """
    return pd.DataFrame([record.as_dict() for record in records], columns=list(CSV_COLUMNS))


def diff_frame(report):
    """DataFrame con una fila por par consecutivo de la familia."""
    return pd.DataFrame([dataclasses.asdict(pair) for pair in report.pairs], columns=list(DIFF_COLUMNS))


def write_frame(frame, path):
    """Escribe un DataFrame como CSV determinista (sin índice, '\\n', 17 dígitos)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.info("CSV escrito en %s (%d filas)", path, len(frame))
    return path


def write_records_csv(records, path):
    return write_frame(records_frame(records), path)


def read_records_csv(path):
    """
    Lee un CSV de observables escrito por write_records_csv.

    Raises:
        CheckpointError: Si las columnas no son las del CSV de observables.
    """
    frame = pd.read_csv(path, dtype=float, float_precision='round_trip')
    if tuple(frame.columns) != CSV_COLUMNS:
        raise CheckpointError(f"{path} no es un CSV de observables (columnas {list(frame.columns)})")
    return [ObsRecord(**row) for row in frame.to_dict('records')]


def write_diff_csv(report, path):
    return write_frame(diff_frame(report), path)


def to_jsonable(value):
    """Convierte recursivamente a tipos JSON; los no finitos se escriben como 'inf', '-inf' o 'nan'."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {_key(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


def _key(key):
    if isinstance(key, float):
        if math.isinf(key):
            return 'inf'
        if key.is_integer():
            return str(int(key))
    return str(key)


def write_json(payload, path):
    """Escribe un resumen JSON con claves ordenadas."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(to_jsonable(payload), f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write('\n')
    logger.info("JSON escrito en %s", path)
    return path


def drift_summary(records):
    """
    Derivas máximas de Q, E y E_n respecto del primer registro.

    Returns:
        dict: Derivas relativas (absolutas si el valor inicial es nulo).
    """
    frame = records_frame(records)
    summary = {}
    for column in ('Q', 'E', 'En', 'Fn'):
        initial = float(frame[column].iloc[0])
        drift = float((frame[column] - initial).abs().max())
        summary[f'{column}_drift'] = drift / abs(initial) if initial != 0 else drift
    return summary


@dataclass
class RunManifest:
    """
    Manifiesto de un comando, escrito al final.

    Attributes:
        command (str): Subcomando ejecutado.
        config_hash (str): Hash canónico de la configuración.
        tool_version (str): Versión de la herramienta.
        wall_clock (float): Segundos de reloj.
        artifacts (dict): Nombre lógico -> ruta de cada archivo escrito.
        passed (bool): Veredicto global.
    """
    command: str
    config_hash: str
    wall_clock: float = 0.0
    artifacts: dict = dataclasses.field(default_factory=dict)
    passed: bool = False
    tool_version: str = TOOL_VERSION


def write_manifest(manifest, out_dir):
    return write_json(manifest, os.path.join(out_dir, 'manifest.json'))
