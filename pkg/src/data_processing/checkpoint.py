"""
Módulo de checkpoints binarios.

Formato (little-endian):
    b"KGS1" | dim (uint32) | modos por eje (uint32 × dim) | longitudes (float64 × dim)
    | n (float64, inf para ∞) | t (float64) | u (complex128, real/imag intercalados)
    | v (float64) | vt (float64)
Los arreglos se escriben en orden de índice múltiple por filas.
"""

import logging
import os
import struct

import numpy as np

from src.dynamics.state import RegLevel, State
from src.spectral.spectral_core import GridSpec
from src.utils.errors import CheckpointError, ConfigurationError

logger = logging.getLogger(__name__)

MAGIC = b'KGS1'


def encode_checkpoint(state, level):
    """Serializa estado y nivel de Yosida a bytes."""
    grid = state.grid
    header = [MAGIC, struct.pack('<I', grid.dim)]
    header.append(struct.pack(f'<{grid.dim}I', *grid.modes))
    header.append(struct.pack(f'<{grid.dim}d', *grid.lengths))
    header.append(struct.pack('<dd', float(RegLevel.parse(level)), float(state.t)))
    arrays = [
        np.ascontiguousarray(state.u.coeffs, dtype='<c16').tobytes(),
        np.ascontiguousarray(state.v.coeffs, dtype='<f8').tobytes(),
        np.ascontiguousarray(state.vt.coeffs, dtype='<f8').tobytes(),
    ]
    return b''.join(header + arrays)


def decode_checkpoint(payload):
    """
    Reconstruye (State, RegLevel) a partir de bytes.

    Raises:
        CheckpointError: Cabecera inválida, tamaño incorrecto o parámetros inválidos.
    """
    if payload[:4] != MAGIC:
        raise CheckpointError("cabecera inválida: se esperaba KGS1")
    offset = 4
    try:
        (dim,) = struct.unpack_from('<I', payload, offset)
        offset += 4
        modes = struct.unpack_from(f'<{dim}I', payload, offset)
        offset += 4 * dim
        lengths = struct.unpack_from(f'<{dim}d', payload, offset)
        offset += 8 * dim
        n_value, t = struct.unpack_from('<dd', payload, offset)
        offset += 16
        grid = GridSpec(dim, modes, lengths)
        level = RegLevel(n_value)
    except (struct.error, ConfigurationError) as error:
        raise CheckpointError(f"cabecera de checkpoint inválida: {error}") from error

    count = int(np.prod(grid.modes))
    expected = offset + count * (16 + 8 + 8)
    if len(payload) != expected:
        raise CheckpointError(f"tamaño {len(payload)} distinto del esperado {expected} (archivo truncado)")
    u = np.frombuffer(payload, dtype='<c16', count=count, offset=offset).reshape(grid.modes)
    offset += 16 * count
    v = np.frombuffer(payload, dtype='<f8', count=count, offset=offset).reshape(grid.modes)
    offset += 8 * count
    vt = np.frombuffer(payload, dtype='<f8', count=count, offset=offset).reshape(grid.modes)
    return State.from_arrays(grid, u, v, vt, t), level


def write_checkpoint(path, state, level):
    """Escribe el checkpoint de un estado."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(encode_checkpoint(state, level))
    logger.info("Checkpoint escrito en %s (t = %.6g)", path, state.t)
    return path


def read_checkpoint(path):
    """Lee un checkpoint; devuelve (State, RegLevel)."""
    if not os.path.exists(path):
        raise CheckpointError(f"no existe el checkpoint {path}")
    with open(path, 'rb') as f:
        return decode_checkpoint(f.read())
