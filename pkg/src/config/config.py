"""
Módulo de configuración de experimentos.
Define el esquema validado (pydantic) del archivo JSON de un experimento, la
carga con sustituciones desde la línea de comandos y el hash canónico.
"""

import hashlib
import json
import math
import os
from typing import Any, Dict, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.dynamics.initial_data import DATA_FAMILIES
from src.dynamics.state import IntegratorConfig, RegLevel
from src.spectral.spectral_core import GridSpec
from src.utils.errors import ConfigurationError

VERIFY_SUITES = ('yosida', 'conservation', 'rate', 'envelope', 'coercivity')

# Campos que no alteran los resultados y quedan fuera del hash
HASH_EXCLUDE = {'output_dir', 'threads'}


class GridConfig(BaseModel):
    """Malla: dimensión, modos y longitudes por eje (una sola entrada se replica en todos los ejes)."""
    model_config = ConfigDict(extra='forbid')

    dim: int = Field(1, ge=1, le=3)
    modes: List[int] = [64]
    lengths: List[float] = [math.pi]

    @model_validator(mode='after')
    def _broadcast_axes(self):
        for name in ('modes', 'lengths'):
            values = getattr(self, name)
            if len(values) == 1:
                setattr(self, name, values * self.dim)
            elif len(values) != self.dim:
                raise ValueError(f"{name} necesita 1 o {self.dim} entradas")
        if any(m < 4 for m in self.modes):
            raise ValueError("se requieren al menos 4 modos por eje")
        if any(length <= 0 for length in self.lengths):
            raise ValueError("las longitudes deben ser positivas")
        return self

    def to_grid(self):
        return GridSpec(self.dim, tuple(self.modes), tuple(self.lengths))


class DataConfig(BaseModel):
    """Datos iniciales: familia con nombre, parámetros y semilla."""
    model_config = ConfigDict(extra='forbid')

    family: str = 'bump'
    params: Dict[str, Any] = {}
    seed: int = Field(0, ge=0)

    @field_validator('family')
    @classmethod
    def _known_family(cls, value):
        if value not in DATA_FAMILIES:
            raise ValueError(f"familia desconocida {value!r}; opciones: {sorted(DATA_FAMILIES)}")
        return value


class IntegratorSettings(BaseModel):
    """Integrador temporal."""
    model_config = ConfigDict(extra='forbid')

    scheme: Literal['lawson-rk4', 'rk4'] = 'lawson-rk4'
    dt: float = Field(1e-3, gt=0)
    dealias: bool = True
    coupling: float = 1.0

    def to_config(self):
        return IntegratorConfig(self.scheme, self.dt, self.dealias, self.coupling)


class VerifySettings(BaseModel):
    """Suites del comando verify y sus parámetros."""
    model_config = ConfigDict(extra='forbid')

    suites: List[str] = list(VERIFY_SUITES)
    fault_injection: float = Field(0.0, ge=0)
    property_n_list: List[int] = [2 ** k for k in range(11)]
    property_samples: int = Field(1000, ge=1)
    property_dims: List[int] = [1, 2]
    property_modes: int = Field(256, ge=4)
    conservation_q_tolerance: float = Field(1e-8, gt=0)
    conservation_e_tolerance: float = Field(1e-6, gt=0)
    rate_dt_levels: List[float] = [4e-3, 2e-3, 1e-3]
    rate_horizon: float = Field(0.05, gt=0)
    rate_order_slack: float = Field(0.3, gt=0)
    gn_ensemble: int = Field(128, ge=1)
    envelope_horizon: float = Field(10.0, gt=0)

    @field_validator('suites')
    @classmethod
    def _known_suites(cls, value):
        if not value:
            raise ValueError("la selección de suites no puede estar vacía")
        unknown = [name for name in value if name not in VERIFY_SUITES]
        if unknown:
            raise ValueError(f"suites desconocidas {unknown}; opciones: {list(VERIFY_SUITES)}")
        return value

    @field_validator('property_dims')
    @classmethod
    def _property_dims(cls, value):
        if not value or any(dim not in (1, 2) for dim in value):
            raise ValueError("property_dims admite las dimensiones 1 y 2")
        return sorted(set(value))

    @field_validator('rate_dt_levels')
    @classmethod
    def _rate_levels(cls, value):
        if len(value) < 2 or any(dt <= 0 for dt in value):
            raise ValueError("rate_dt_levels necesita al menos dos pasos positivos")
        return sorted(value, reverse=True)


class OracleSettings(BaseModel):
    """Validación cruzada Picard contra el integrador."""
    model_config = ConfigDict(extra='forbid')

    horizon: float = Field(0.1, gt=0)
    dt: float = Field(1e-3, gt=0)
    tol: float = Field(1e-12, gt=0)
    max_sweeps: int = Field(50, ge=1)
    tolerance: float = Field(1e-6, gt=0)


class ExperimentConfig(BaseModel):
    """
    Configuración completa de un experimento.

    Attributes:
        grid, data, integrator, verify, oracle: Secciones anidadas.
        n (int | str): Nivel de Yosida de run/oracle ('inf' para el sistema original).
        n_list (list): Niveles de la familia de converge.
        horizon (float): Horizonte T.
        sample_every (int): Pasos entre muestras.
        output_dir (str): Directorio de salida.
        mode (str): 'strong' o 'finite-energy'.
        checkpoint_every (int): Muestras entre checkpoints (0 desactiva).
        rate_threshold (float): Tasa mínima exigida por converge.
        lp_ratio_bound (float): Cota del cociente L^p en modo de energía finita.
        threads (int): Hilos de trabajo (no alteran los resultados).
    """
    model_config = ConfigDict(extra='forbid')

    grid: GridConfig = Field(default_factory=GridConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    integrator: IntegratorSettings = Field(default_factory=IntegratorSettings)
    verify: VerifySettings = Field(default_factory=VerifySettings)
    oracle: OracleSettings = Field(default_factory=OracleSettings)
    n: Union[int, str] = 'inf'
    n_list: List[int] = [8, 16, 32, 64, 128]
    horizon: float = Field(1.0, ge=0)
    sample_every: int = Field(10, ge=1)
    output_dir: str = 'results'
    mode: Literal['strong', 'finite-energy'] = 'strong'
    checkpoint_every: int = Field(0, ge=0)
    rate_threshold: float = 0.35
    lp_ratio_bound: float = Field(1.0, gt=0)
    threads: int = Field(1, ge=1)

    @field_validator('n')
    @classmethod
    def _valid_level(cls, value):
        level = RegLevel.parse(value)
        return 'inf' if level.is_infinite else int(level.n)

    @field_validator('n_list')
    @classmethod
    def _increasing(cls, value):
        if any(n < 1 for n in value):
            raise ValueError("los niveles de n_list deben ser enteros positivos")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n_list debe ser estrictamente creciente")
        return value

    @property
    def level(self):
        return RegLevel.parse(self.n)


def config_hash(config):
    """SHA-256 del JSON canónico (claves ordenadas, separadores compactos) de la configuración."""
    payload = config.model_dump(mode='json', exclude=HASH_EXCLUDE)
    canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'), ensure_ascii=True)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def format_validation_error(error):
    """Líneas '<ruta.del.campo>: <mensaje>' de un pydantic.ValidationError."""
    return ['.'.join(str(part) for part in item['loc']) + ': ' + item['msg'] for item in error.errors()]


def load_config(path=None, seed=None, output_dir=None, threads=None):
    """
    Carga y valida la configuración, aplicando las sustituciones de la línea de comandos.

    Args:
        path (str, optional): Archivo JSON; sin él se usan los valores por defecto.
        seed (int, optional): Sustituye data.seed.
        output_dir (str, optional): Sustituye output_dir.
        threads (int, optional): Sustituye threads.

    Returns:
        ExperimentConfig: Configuración validada.

    Raises:
        ConfigurationError: Si el archivo no existe o no es JSON válido.
        pydantic.ValidationError: Si algún campo es inválido.
    """
    if path is None:
        raw = {}
    else:
        if not os.path.exists(path):
            raise ConfigurationError(f"no existe el archivo de configuración {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                raw = json.load(f)
        except json.JSONDecodeError as error:
            raise ConfigurationError(f"JSON inválido en {path}: {error}") from error
    if not isinstance(raw, dict):
        raise ConfigurationError("la configuración debe ser un objeto JSON")
    if seed is not None:
        raw.setdefault('data', {})['seed'] = seed
    if output_dir is not None:
        raw['output_dir'] = output_dir
    if threads is not None:
        raw['threads'] = threads
    return ExperimentConfig.model_validate(raw)


__all__ = [
    'ExperimentConfig', 'GridConfig', 'DataConfig', 'IntegratorSettings', 'VerifySettings',
    'OracleSettings', 'ValidationError', 'VERIFY_SUITES', 'config_hash', 'format_validation_error',
    'load_config',
]
