"""
Run artifacts: binary field files, CSV series, JSON summaries and the run manifest.

Every file of a run is written atomically (temporary file + rename) and
registered with its SHA-256 checksum; the manifest is written last, so a run
directory is either complete with a manifest or carries a manifest marked
failed.

Field file layout::

    b"ANHF1\\n" | uint32 LE header length | JSON header | float64 C-order blocks

The header holds the chart axes, the ordered field names and the grid shape.
"""

import csv
import hashlib
import io
import json
import logging
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .config import OUTPUT_CONFIG
from .errors import ConfigError, IntegrityError
from .geometry import GridChart

logger = logging.getLogger(__name__)

FIELD_MAGIC = b'ANHF1\n'
PathLike = Union[str, Path]


def _to_builtin(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, datetime):
        return obj.isoformat()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def dumps_json(obj: Any) -> str:
    """Stable-key-ordered JSON."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_to_builtin, allow_nan=True) + '\n'


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path: PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_fields(fields: Dict[str, np.ndarray], chart: GridChart,
                  extra: Optional[Dict[str, Any]] = None) -> bytes:
    names = list(fields)
    for name in names:
        chart.check_field(fields[name], name)
        if np.shape(fields[name]) != chart.shape:
            raise ConfigError(f"field '{name}' must be scalar on the chart")
    header = {'axes': chart.to_dict()['axes'], 'fields': names, 'shape': list(chart.shape),
              'extra': extra or {}}
    head = json.dumps(header, sort_keys=True, default=_to_builtin).encode('utf-8')
    body = b''.join(np.ascontiguousarray(fields[n], dtype='<f8').tobytes() for n in names)
    return FIELD_MAGIC + struct.pack('<I', len(head)) + head + body


def decode_fields(data: bytes) -> Tuple[Dict[str, np.ndarray], GridChart, Dict[str, Any]]:
    if not data.startswith(FIELD_MAGIC):
        raise IntegrityError("not an ANHF1 field file (bad magic)")
    offset = len(FIELD_MAGIC)
    try:
        (length,) = struct.unpack_from('<I', data, offset)
        offset += 4
        header = json.loads(data[offset:offset + length].decode('utf-8'))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise IntegrityError(f"corrupt field file header: {e}") from e
    offset += length
    chart = GridChart.from_dict({'axes': header['axes']})
    size = int(np.prod(header['shape']))
    expected = offset + 8 * size * len(header['fields'])
    if len(data) != expected:
        raise IntegrityError(f"field file has {len(data)} bytes, expected {expected}")
    fields = {}
    for name in header['fields']:
        fields[name] = np.frombuffer(data, dtype='<f8', count=size,
                                     offset=offset).reshape(header['shape']).copy()
        offset += 8 * size
    return fields, chart, header.get('extra', {})


def read_fields(path: PathLike) -> Tuple[Dict[str, np.ndarray], GridChart, Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"field file {path} does not exist")
    return decode_fields(path.read_bytes())


def encode_csv(rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None,
               float_format: str = OUTPUT_CONFIG['float_format']) -> bytes:
    """Comma-separated, header row, floats in repr-exact format, empty cell for None."""
    if columns is None:
        columns = list(rows[0]) if rows else []

    def cell(v):
        if v is None:
            return ''
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v)).lower()
        if isinstance(v, (float, np.floating)):
            return format(float(v), float_format)
        return str(v)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([cell(row.get(c)) for c in columns])
    return buf.getvalue().encode('utf-8')


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, newline='') as fh:
        return list(csv.DictReader(fh))


@dataclass
class FileRecord:
    name: str
    sha256: str
    bytes: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunManifest:
    """Provenance of one run directory."""

    command: str
    config_hash: str
    seed: int
    version: str = __version__
    started: datetime = field(default_factory=datetime.now)
    finished: Optional[datetime] = None
    status: str = 'running'
    files: List[FileRecord] = field(default_factory=list)
    error: Optional[str] = None
    summary: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['started'] = self.started.isoformat()
        data['finished'] = self.finished.isoformat() if self.finished else None
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        data = dict(data)
        data['started'] = datetime.fromisoformat(data['started'])
        if data.get('finished'):
            data['finished'] = datetime.fromisoformat(data['finished'])
        data['files'] = [FileRecord(**f) for f in data.get('files', [])]
        return cls(**data)


def run_dir_name(command: str, config_hash: str, seed: int) -> str:
    return f"{command}-{config_hash[:12]}-s{seed}"


def output_root(out: Optional[PathLike] = None) -> Path:
    """``--out`` if given, else the environment override, else the configured root."""
    if out is not None:
        return Path(out)
    return Path(os.environ.get(OUTPUT_CONFIG['env_var'], OUTPUT_CONFIG['root']))


class RunDirectory:
    """Writes the artifacts of one run and its manifest."""

    def __init__(self, root: PathLike, command: str, config_hash: str, seed: int):
        self.path = Path(root) / run_dir_name(command, config_hash, seed)
        self.path.mkdir(parents=True, exist_ok=True)
        stale = self.path / OUTPUT_CONFIG['manifest_name']
        if stale.exists():
            stale.unlink()
        self.manifest = RunManifest(command=command, config_hash=config_hash, seed=int(seed))
        logger.info(f"Run directory {self.path}")

    def _register(self, name: str, data: bytes) -> Path:
        target = self.path / name
        atomic_write(target, data)
        self.manifest.files = [f for f in self.manifest.files if f.name != name]
        self.manifest.files.append(FileRecord(name=name, sha256=sha256_bytes(data),
                                              bytes=len(data)))
        logger.debug(f"wrote {target} ({len(data)} bytes)")
        return target

    def write_fields(self, name: str, fields: Dict[str, np.ndarray], chart: GridChart,
                     extra: Optional[Dict[str, Any]] = None) -> Path:
        return self._register(name, encode_fields(fields, chart, extra))

    def write_csv(self, name: str, rows: Sequence[Dict[str, Any]],
                  columns: Optional[Sequence[str]] = None) -> Path:
        return self._register(name, encode_csv(rows, columns))

    def write_json(self, name: str, obj: Any) -> Path:
        return self._register(name, dumps_json(obj).encode('utf-8'))

    def write_text(self, name: str, text: str) -> Path:
        return self._register(name, text.encode('utf-8'))

    def finalize(self, status: str = 'ok', error: Optional[str] = None,
                 summary: Optional[Dict[str, Any]] = None) -> RunManifest:
        self.manifest.status = status
        self.manifest.error = error
        self.manifest.finished = datetime.now()
        if summary:
            self.manifest.summary = summary
        atomic_write(self.path / OUTPUT_CONFIG['manifest_name'],
                     dumps_json(self.manifest.to_dict()).encode('utf-8'))
        logger.info(f"Run {self.path.name} finished with status '{status}'")
        return self.manifest


def load_manifest(run_dir: PathLike) -> RunManifest:
    path = Path(run_dir) / OUTPUT_CONFIG['manifest_name']
    if not path.is_file():
        raise IntegrityError(f"{run_dir} has no manifest")
    try:
        return RunManifest.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise IntegrityError(f"manifest of {run_dir} is corrupt: {e}") from e


def verify_run(run_dir: PathLike) -> List[str]:
    """Names of files whose checksum does not match the manifest (missing files included)."""
    manifest = load_manifest(run_dir)
    failures = []
    for rec in manifest.files:
        target = Path(run_dir) / rec.name
        if not target.is_file():
            failures.append(rec.name)
        elif sha256_file(target) != rec.sha256:
            failures.append(rec.name)
    if failures:
        logger.warning(f"{run_dir}: checksum failures {failures}")
    return failures


def iter_run_dirs(paths: Iterable[PathLike]) -> List[Path]:
    out = []
    for p in paths:
        p = Path(p)
        if not p.is_dir():
            raise IntegrityError(f"{p} is not a run directory")
        out.append(p)
    return out
