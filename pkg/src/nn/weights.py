"""
Weight files: uncompressed .npz archives with a JSON header.

Layout:
    __header__      uint8 bytes of a UTF-8 JSON object
                    {"format": "velonet-weights", "version": 1, "config": {...}}
    param/<name>    little-endian parameter array
    buffer/<name>   little-endian buffer array (BatchNorm running statistics)
"""

import json
import logging
import zipfile
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.core.errors import ConfigMismatchError, ContractViolation, CorruptWeightsError
from src.nn.velonet import VeloNet, VeloNetConfig, build

logger = logging.getLogger(__name__)

FORMAT_NAME = "velonet-weights"
FORMAT_VERSION = 1
HEADER_KEY = "__header__"

# Settings that only influence initialisation, not the stored tensors.
_INIT_ONLY_FIELDS = {"rng_seed"}


def _little_endian(array: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))


def save_weights(net: VeloNet, path: Union[str, Path]) -> Path:
    """Write every parameter and buffer of `net` to `path` (exact round trip)."""
    path = Path(path)
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "config": net.config.to_dict()}
    arrays = {HEADER_KEY: np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)}
    for name, param in net.named_parameters():
        arrays[f"param/{name}"] = _little_endian(param.data)
    for name, buf in net.named_buffers():
        arrays[f"buffer/{name}"] = _little_endian(buf)

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    logger.info(f"Saved {len(arrays) - 1} arrays to {path}")
    return path


def read_header(path: Union[str, Path]) -> dict:
    """Return the parsed JSON header of a weight file."""
    with _open_archive(path) as archive:
        return _parse_header(archive, path)


def _open_archive(path: Union[str, Path]):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Weight file not found: {path}")
    try:
        return np.load(path, allow_pickle=False)
    except (zipfile.BadZipFile, ValueError, OSError, EOFError) as e:
        raise CorruptWeightsError(f"{path}: not a readable weight archive ({e})") from e


def _parse_header(archive, path) -> dict:
    if HEADER_KEY not in archive.files:
        raise CorruptWeightsError(f"{path}: missing header")
    try:
        header = json.loads(archive[HEADER_KEY].tobytes().decode("utf-8"))
    except (ValueError, UnicodeDecodeError, zipfile.BadZipFile, EOFError) as e:
        raise CorruptWeightsError(f"{path}: unreadable header ({e})") from e
    if header.get("format") != FORMAT_NAME:
        raise CorruptWeightsError(f"{path}: unexpected format '{header.get('format')}'")
    if header.get("version") != FORMAT_VERSION:
        raise CorruptWeightsError(f"{path}: unsupported version {header.get('version')}")
    if not isinstance(header.get("config"), dict):
        raise CorruptWeightsError(f"{path}: header has no config")
    return header


def load_weights(path: Union[str, Path], config: Optional[VeloNetConfig] = None) -> VeloNet:
    """
    Rebuild a network from a weight file.

    Args:
        path: Weight file written by `save_weights`.
        config: Expected configuration. When omitted the header's config is used.

    Returns:
        Network with restored parameters and running statistics, in eval mode.

    Raises:
        ConfigMismatchError: `config` differs from the saved configuration.
        CorruptWeightsError: the file is truncated, malformed or incomplete.
    """
    with _open_archive(path) as archive:
        header = _parse_header(archive, path)
        try:
            saved_config = VeloNetConfig.from_dict(header["config"])
        except (ContractViolation, TypeError) as e:
            raise CorruptWeightsError(f"{path}: invalid config in header ({e})") from e

        if config is not None:
            wanted, saved = config.to_dict(), saved_config.to_dict()
            differing = sorted(
                key for key in wanted if key not in _INIT_ONLY_FIELDS and wanted[key] != saved[key]
            )
            if differing:
                details = ", ".join(f"{k}: saved={saved[k]!r} requested={wanted[k]!r}" for k in differing)
                raise ConfigMismatchError(f"{path}: configuration mismatch ({details})")

        net = build(config or saved_config)
        state = {}
        try:
            for key in archive.files:
                if key == HEADER_KEY:
                    continue
                kind, _, name = key.partition("/")
                if kind not in ("param", "buffer") or not name:
                    raise CorruptWeightsError(f"{path}: unexpected entry '{key}'")
                state[name] = archive[key]
        except (zipfile.BadZipFile, ValueError, OSError, EOFError) as e:
            if isinstance(e, CorruptWeightsError):
                raise
            raise CorruptWeightsError(f"{path}: truncated or damaged payload ({e})") from e

    try:
        net.load_state_dict(state)
    except ContractViolation as e:
        raise CorruptWeightsError(f"{path}: {e}") from e
    net.eval()
    logger.info(f"Loaded weights from {path} ({net.parameter_count():,} parameters)")
    return net
