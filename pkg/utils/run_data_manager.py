# [file name]: utils/run_data_manager.py
"""
Run Data Manager - Manages the output directory of a run
CSV tables carry `#` metadata lines (command, config hash, seed); binary
traces use a small fixed header carrying the same hash and seed. Nothing
written depends on wall-clock time.
"""

import csv
import io
import math
import struct
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from atomsense.errors import InputFormatError
from atomsense.sensors_and_noise import SensorTrace
from utils.log import get_logger

logger = get_logger("RunData")

TRACE_MAGIC = b"ATMSNS02"
# magic, sample rate, start time, sample count, config hash, seed
TRACE_HEADER = struct.Struct("<8sddQ16sQ")


class TraceHeader(NamedTuple):
    sample_rate: float
    start_time: float
    count: int
    config_hash: str
    seed: int


def format_value(value) -> str:
    """repr-precision text for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


class RunDataManager:
    """
    Writes and reads the artifacts of one invocation.
    Every file lands in out_dir.
    """

    def __init__(self, out_dir, command: str, config_hash: str, seed: int):
        self.out_dir = Path(out_dir)
        self.command = command
        self.config_hash = config_hash
        self.seed = seed
        self.written: list[Path] = []

    def ensure_dir(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def metadata_lines(self) -> list[str]:
        return [f"# atomsense {self.command}", f"# config_hash={self.config_hash}", f"# seed={self.seed}"]

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """Write a metadata-prefixed CSV table; returns its path."""
        self.ensure_dir()
        buffer = io.StringIO()
        for line in self.metadata_lines():
            buffer.write(line + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(buffer.getvalue())
        self.written.append(path)
        logger.info(f"Wrote {path} ({count} rows)")
        return path

    def write_trace(self, name: str, trace: SensorTrace) -> Path:
        self.ensure_dir()
        path = self.path(name)
        write_trace(path, trace, self.config_hash, self.seed)
        self.written.append(path)
        logger.info(f"Wrote {path} ({len(trace)} samples)")
        return path


def write_trace(path, trace: SensorTrace, config_hash: str = "", seed: int = 0):
    samples = np.ascontiguousarray(trace.samples, dtype="<f8")
    header = TRACE_HEADER.pack(TRACE_MAGIC, float(trace.sample_rate), float(trace.start_time), samples.size,
                               config_hash.encode("ascii"), int(seed))
    with open(path, "wb") as f:
        f.write(header)
        f.write(samples.tobytes())


def read_trace_header(path) -> TraceHeader:
    """Header of a binary trace, checked against the file size."""
    data = Path(path).read_bytes()
    return _unpack_header(path, data)


def _unpack_header(path, data: bytes) -> TraceHeader:
    if len(data) < TRACE_HEADER.size:
        raise InputFormatError(path, 1, "file shorter than the trace header")
    magic, rate, start, count, config_hash, seed = TRACE_HEADER.unpack_from(data)
    if magic != TRACE_MAGIC:
        raise InputFormatError(path, 1, f"bad magic {magic!r}")
    expected = TRACE_HEADER.size + 8 * count
    if len(data) != expected:
        raise InputFormatError(path, 1, f"expected {expected} bytes for {count} samples, found {len(data)}")
    return TraceHeader(rate, start, count, config_hash.rstrip(b"\0").decode("ascii"), seed)


def read_trace(path, units: str = "") -> SensorTrace:
    """Read a binary trace written by write_trace."""
    data = Path(path).read_bytes()
    header = _unpack_header(path, data)
    samples = np.frombuffer(data, dtype="<f8", offset=TRACE_HEADER.size, count=header.count).copy()
    return SensorTrace(header.sample_rate, samples, header.start_time, units)


def read_csv_metadata(path) -> dict:
    """key=value pairs from the leading `#` lines."""
    meta = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            text = line[1:].strip()
            if "=" in text:
                key, value = text.split("=", 1)
                meta[key.strip()] = value.strip()
            elif text.startswith("atomsense "):
                meta["command"] = text.split(" ", 1)[1]
    return meta


def read_csv_columns(path, columns: Optional[Sequence[str]] = None, allow_missing: Sequence[str] = ()) -> dict:
    """
    Read numeric columns of a CSV table.

    `#` lines are skipped; the first other line is the header. Empty cells
    read as NaN only for columns listed in allow_missing.

    Args:
        path: CSV file
        columns: names to return (all if None)
        allow_missing: columns whose empty cells are NaN

    Returns:
        {name: np.ndarray}

    Raises:
        InputFormatError: with the 1-based line number of the offending line
    """
    path = Path(path)
    if not path.exists():
        raise InputFormatError(path, 0, "file not found")
    header = None
    header_line = 0
    values: dict = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        for line_number, row in enumerate(csv.reader(f), start=1):
            if not row or (row[0].startswith("#")):
                continue
            if header is None:
                header = [h.strip() for h in row]
                header_line = line_number
                if len(set(header)) != len(header):
                    raise InputFormatError(path, line_number, "duplicate column names")
                wanted = header if columns is None else list(columns)
                for name in wanted:
                    if name not in header:
                        raise InputFormatError(path, line_number, f"missing column '{name}'")
                index = {name: header.index(name) for name in wanted}
                values = {name: [] for name in wanted}
                continue
            if len(row) != len(header):
                raise InputFormatError(path, line_number, f"expected {len(header)} fields, found {len(row)}")
            for name, i in index.items():
                cell = row[i].strip()
                if cell == "" and name in allow_missing:
                    values[name].append(float("nan"))
                    continue
                try:
                    number = float(cell)
                except ValueError:
                    raise InputFormatError(path, line_number, f"column '{name}': '{cell}' is not a number") from None
                if not math.isfinite(number):
                    raise InputFormatError(path, line_number, f"column '{name}': non-finite value '{cell}'")
                values[name].append(number)
    if header is None:
        raise InputFormatError(path, max(header_line, 1), "no header row")
    return {name: np.asarray(v, dtype=float) for name, v in values.items()}
