"""
Pruebas del formato binario de checkpoints.
"""

import math

import numpy as np
import pytest

from src.data_processing.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    read_checkpoint,
    write_checkpoint,
)
from src.dynamics.dynamics import regularized_initial_data
from src.dynamics.initial_data import rough_field
from src.dynamics.state import RegLevel, State
from src.spectral.spectral_core import GridSpec
from src.utils.errors import CheckpointError


@pytest.fixture
def state_2d():
    grid = GridSpec(2, (8, 6), (math.pi, 2.0))
    return State(rough_field(grid, 1), rough_field(grid, 2, kind='real'), rough_field(grid, 3, kind='real'), t=0.375)


class TestCheckpoint:
    """Codificación y lectura de checkpoints."""

    def test_lossless(self, state_2d):
        payload = encode_checkpoint(state_2d, 32)
        assert payload[:4] == MAGIC
        decoded, level = decode_checkpoint(payload)
        assert level == RegLevel(32)
        assert decoded.t == state_2d.t
        assert decoded.grid == state_2d.grid
        for a, b in zip(decoded.arrays(), state_2d.arrays()):
            assert np.array_equal(a, b)

    def test_payload_size(self, state_2d):
        # cabecera: magia, dim, modos, longitudes, n y t; después 32 bytes por modo
        header = 4 + 4 + 4 * 2 + 8 * 2 + 16
        assert len(encode_checkpoint(state_2d, 'inf')) == header + 48 * 32

    def test_infinite_level(self, sine_data, tmp_path):
        state = regularized_initial_data(*sine_data, 'inf')
        path = write_checkpoint(str(tmp_path / 'checkpoints' / 'checkpoint_000001.kgs'), state, 'inf')
        decoded, level = read_checkpoint(path)
        assert level.is_infinite
        assert np.array_equal(decoded.u.coeffs, state.u.coeffs)

    def test_bad_magic(self, state_2d):
        payload = b'XXXX' + encode_checkpoint(state_2d, 8)[4:]
        with pytest.raises(CheckpointError, match="KGS1"):
            decode_checkpoint(payload)

    def test_truncated(self, state_2d):
        payload = encode_checkpoint(state_2d, 8)
        with pytest.raises(CheckpointError, match="truncado"):
            decode_checkpoint(payload[:-8])

    def test_truncated_header(self):
        with pytest.raises(CheckpointError, match="cabecera"):
            decode_checkpoint(MAGIC + b'\x01\x00')

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="no existe"):
            read_checkpoint(str(tmp_path / 'none.kgs'))
