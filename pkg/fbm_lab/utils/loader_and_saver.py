import dataclasses
import json
import logging
import math
import pathlib
import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
import yaml

from ..errors import DomainError
from ..simulator.covariance import CovKind, ModelParams
from ..simulator.sampling import PathBatch

LOGGER = logging.getLogger(__name__)

DEFAULT_SEED = 20240611
SCHEMA_VERSION = "1"
FORMATS = ("json", "csv")
MAGIC = b"FBMLAB01"
KIND_CODES = {kind: code for code, kind in enumerate(CovKind)}

HEADER_DTYPE = np.dtype(
    [
        ("kind", "<i4"),
        ("H", "<f8"),
        ("d", "<i4"),
        ("seed", "<i8"),
        ("n", "<i8"),
        ("T", "<f8"),
        ("replicas", "<i8"),
    ],
)

PathLike = Union[str, pathlib.Path]

DEFAULTS = {
    "model": {"H": 0.3, "d": 1, "p": 2},
    "numerics": {
        "n": 256,
        "T": 1.0,
        "eps": None,
        "replicas": 1000,
        "m_max": 4,
        "budget": 100000,
        "workers": 1,
    },
    "experiment": {
        "seed": DEFAULT_SEED,
        "out": None,
        "format": "json",
        "verbose": 0,
    },
    "verify": {"suite": "core"},
}


@dataclass
class ExperimentConfig:
    """Resolved configuration of one command-line experiment."""

    subcommand: str
    H: float = DEFAULTS["model"]["H"]
    d: int = DEFAULTS["model"]["d"]
    p: int = DEFAULTS["model"]["p"]
    n: int = DEFAULTS["numerics"]["n"]
    T: float = DEFAULTS["numerics"]["T"]
    eps: Optional[float] = None
    replicas: int = DEFAULTS["numerics"]["replicas"]
    m_max: int = DEFAULTS["numerics"]["m_max"]
    budget: int = DEFAULTS["numerics"]["budget"]
    workers: int = DEFAULTS["numerics"]["workers"]
    seed: int = DEFAULT_SEED
    out: Optional[str] = None
    format: str = "json"
    verbose: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.format not in FORMATS:
            msg = f"Output format must be one of {FORMATS}, got {self.format!r}"
            raise DomainError(msg)
        for name in ("n", "replicas", "m_max", "budget", "workers"):
            if getattr(self, name) < 1:
                msg = f"{name} must be positive, got {getattr(self, name)}"
                raise DomainError(msg)
        if not self.T > 0.0:
            msg = f"Horizon must be positive, got {self.T}"
            raise DomainError(msg)
        if self.eps is not None and not self.eps > 0.0:
            msg = f"Kernel variance must be positive, got {self.eps}"
            raise DomainError(msg)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.H, self.d, self.p)

    def to_dict(self) -> dict:
        """Configuration embedded in reports.

        Worker count, verbosity and output path are left out since results
        do not depend on them.
        """
        record = dataclasses.asdict(self)
        record.pop("workers")
        record.pop("verbose")
        record.pop("out")
        return record


def load_config(config_filename: Optional[PathLike] = None) -> dict:
    """
    Read a YAML experiment file over the packaged defaults.

    :param config_filename: Path to the YAML file, None for the defaults
    :return: the sections ``model``, ``numerics``, ``experiment`` and ``verify``
    """
    params = {section: dict(values) for section, values in DEFAULTS.items()}
    if config_filename is None:
        return params
    config_filename = pathlib.Path(config_filename)
    with config_filename.open() as config_file:
        loaded = yaml.safe_load(config_file) or {}
    for section, values in loaded.items():
        if section not in params:
            msg = f"Unknown configuration section {section!r} in {config_filename}"
            raise DomainError(msg)
        params[section].update(values or {})
    LOGGER.info("Loaded configuration from %s", config_filename)
    return params


def resolve_config(subcommand: str, params: dict, overrides: dict) -> ExperimentConfig:
    """Flatten configuration sections and apply command-line overrides."""
    flat = {}
    for section in ("model", "numerics", "experiment"):
        flat.update(params[section])
    flat.update({key: value for key, value in overrides.items() if value is not None})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    options = {**params.get("verify", {})}
    options.update({key: value for key, value in flat.items() if key not in known})
    flat = {key: value for key, value in flat.items() if key in known}
    flat.pop("subcommand", None)
    flat.pop("options", None)
    return ExperimentConfig(subcommand=subcommand, options=options, **flat)


class ReportEncoder(json.JSONEncoder):
    """Reports, dataclasses, numpy values and enums as plain JSON values."""

    def default(self, o):
        if hasattr(o, "to_dict"):
            return o.to_dict()
        if dataclasses.is_dataclass(o) and not isinstance(o, type):
            return dataclasses.asdict(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, Enum):
            return o.value
        return super().default(o)


def _encode(value, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if value is None or isinstance(value, bool):
        return json.dumps(value)
    if isinstance(value, float):
        return format(value, ".17g") if math.isfinite(value) else "null"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{inner}{json.dumps(key)}: {_encode(item, indent + 1)}"
            for key, item in value.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(item, (dict, list)) for item in value):
            return "[" + ", ".join(_encode(item, indent + 1) for item in value) + "]"
        items = [f"{inner}{_encode(item, indent + 1)}" for item in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    msg = f"Cannot encode {type(value).__name__}"
    raise TypeError(msg)


def dumps_report(report) -> str:
    """JSON text with 17 significant digits and non-finite floats as null.

    Floats never reach ``JSONEncoder.default``, so the encoder only reduces the
    report to plain values and the layout is written here.
    """
    plain = json.loads(json.dumps(report, cls=ReportEncoder))
    return _encode(plain, 0) + "\n"


def build_report(config: ExperimentConfig, results) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": config.subcommand,
        "config": config.to_dict(),
        "results": results,
    }


def save_csv(path: Optional[PathLike], header, columns) -> None:
    """Columns of equal length as comma-separated text (stdout when no path)."""
    table = np.column_stack([np.asarray(column, dtype=float) for column in columns])
    target = sys.stdout if path is None else pathlib.Path(path)
    np.savetxt(
        target,
        table,
        fmt="%.17g",
        delimiter=",",
        header=",".join(header),
        comments="",
    )


def save_rows(path: Optional[PathLike], header, rows) -> None:
    """Mixed text and number rows as comma-separated text."""
    table = np.array([[str(item) for item in row] for row in rows], dtype=object)
    target = sys.stdout if path is None else pathlib.Path(path)
    np.savetxt(
        target,
        table,
        fmt="%s",
        delimiter=",",
        header=",".join(header),
        comments="",
    )


def save_report(report: dict, path: Optional[PathLike]) -> None:
    """Write a JSON report to ``path`` or to stdout."""
    text = dumps_report(report)
    if path is None:
        sys.stdout.write(text)
        return
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    LOGGER.info("Report saved as %s", path)


def handler(signum, frame, name: str, partial: dict, path: Optional[PathLike]):
    """
    Called on CTRL+C: saves what a long run has gathered so far.

    :param signum: The signal number
    :param frame: The current stack frame
    :param name: Name of the interrupted run
    :param partial: Report gathered so far
    :param path: Where the report goes
    """
    LOGGER.warning("Run %s interrupted, saving partial report", name)
    save_report({**partial, "interrupted": True}, path)
    sys.exit(1)


def save_paths_csv(batch: PathBatch, path: PathLike) -> None:
    """One time column then one column per replica and coordinate."""
    header = ["t"]
    columns = [batch.times]
    for replica in range(len(batch)):
        for coordinate in range(batch.dimension):
            header.append(f"r{batch.first_replica + replica}_x{coordinate}")
            columns.append(batch.values[replica, :, coordinate])
    save_csv(path, header, columns)


def load_paths_csv(path: PathLike, dimension: int = 1) -> PathBatch:
    table = np.loadtxt(pathlib.Path(path), delimiter=",", skiprows=1, ndmin=2)
    times = table[:, 0]
    values = table[:, 1:]
    if values.shape[1] % dimension:
        msg = f"{values.shape[1]} value columns do not split into dimension {dimension}"
        raise DomainError(msg)
    replicas = values.shape[1] // dimension
    values = values.reshape(times.size, replicas, dimension).transpose(1, 0, 2)
    return PathBatch(times, np.ascontiguousarray(values))


def save_paths_binary(batch: PathBatch, path: PathLike, kind: CovKind, H: float):
    """Little-endian container: magic, header, times, then values."""
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["kind"] = KIND_CODES[kind]
    header["H"] = H
    header["d"] = batch.dimension
    header["seed"] = -1 if batch.seed is None else batch.seed
    header["n"] = batch.times.size - 1
    header["T"] = batch.times[-1]
    header["replicas"] = len(batch)
    path = pathlib.Path(path)
    with path.open("wb") as stream:
        stream.write(MAGIC)
        stream.write(header.tobytes())
        stream.write(batch.times.astype("<f8").tobytes())
        stream.write(batch.values.astype("<f8").tobytes())


def load_paths_binary(path: PathLike) -> tuple:
    """:return: ``(batch, kind, H)``"""
    raw = pathlib.Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        msg = f"{path} is not a path container"
        raise DomainError(msg)
    offset = len(MAGIC)
    header = np.frombuffer(raw, dtype=HEADER_DTYPE, count=1, offset=offset)[0]
    offset += HEADER_DTYPE.itemsize
    points = int(header["n"]) + 1
    times = np.frombuffer(raw, dtype="<f8", count=points, offset=offset)
    offset += 8 * points
    shape = (int(header["replicas"]), points, int(header["d"]))
    values = np.frombuffer(raw, dtype="<f8", count=int(np.prod(shape)), offset=offset)
    seed = int(header["seed"])
    batch = PathBatch(
        times.astype(float),
        values.reshape(shape).astype(float),
        seed=None if seed < 0 else seed,
    )
    kind = list(CovKind)[int(header["kind"])]
    return batch, kind, float(header["H"])
