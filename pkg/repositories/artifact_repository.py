"""
Artifact repository: CSV tables with '#' metadata lines, key-value
documents, the TOML-compatible run manifest and long-format plot data.
Numbers are written locale-independently with full precision; nothing
time-dependent is written, so identical runs give identical files.
"""

import csv
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from repositories.interfaces.artifact_repository import ArtifactRepositoryInterface

logger = logging.getLogger(__name__)

_BARE_KEY = re.compile(r"^[A-Za-z0-9_-]+$")
MANIFEST_NAME = "manifest.txt"


class ValueFormatter:
    """Renders scalars, sequences and tables as text"""

    def __init__(self, significant_digits: int = 17):
        self._digits = significant_digits

    def number(self, value: float) -> str:
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, f".{self._digits}g")

    def cell(self, value: Any) -> str:
        """CSV cell"""
        if value is None:
            return ""
        if isinstance(value, (bool, np.bool_)):
            return "true" if value else "false"
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return self.number(value)
        if isinstance(value, (list, tuple, np.ndarray)):
            return ";".join(self.cell(item) for item in np.ravel(np.asarray(value, dtype=object)))
        return str(value)

    def toml(self, value: Any) -> str:
        """TOML value"""
        if isinstance(value, (bool, np.bool_)):
            return "true" if value else "false"
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return self.number(value)
        if isinstance(value, Mapping):
            inner = ", ".join(f"{self.key(k)} = {self.toml(v)}" for k, v in value.items() if v is not None)
            return "{ " + inner + " }" if inner else "{}"
        if isinstance(value, (list, tuple, np.ndarray)):
            return "[" + ", ".join(self.toml(item) for item in value) + "]"
        return json.dumps(str(value))

    @staticmethod
    def key(name: str) -> str:
        return name if _BARE_KEY.match(name) else json.dumps(name)


class ArtifactRepository(ArtifactRepositoryInterface):
    """
    Writes artifacts below one output directory.
    Every document carries the same run metadata (stamped 'unvalidated' when forced).
    """

    def __init__(self, directory: str, significant_digits: int = 17,
                 run_metadata: Optional[Mapping[str, Any]] = None):
        self._directory = Path(directory)
        self._format = ValueFormatter(significant_digits)
        self._run_metadata: Dict[str, Any] = dict(run_metadata or {})

    @property
    def directory(self) -> Path:
        return self._directory

    def stamp(self, key: str, value: Any):
        """Add a metadata entry to every artifact written from now on"""
        self._run_metadata[key] = value

    def _path(self, name: str) -> Path:
        self._directory.mkdir(parents=True, exist_ok=True)
        return self._directory / name

    def _metadata_lines(self, metadata: Optional[Mapping[str, Any]]) -> Iterable[str]:
        merged = dict(self._run_metadata)
        merged.update(metadata or {})
        for key, value in merged.items():
            yield f"# {key} = {self._format.cell(value)}\n"

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
                  metadata: Optional[Mapping[str, Any]] = None) -> Path:
        path = self._path(name)
        count = 0
        with path.open("w", newline="", encoding="utf-8") as handle:
            for line in self._metadata_lines(metadata):
                handle.write(line)
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(list(header))
            for row in rows:
                writer.writerow([self._format.cell(value) for value in row])
                count += 1
        logger.info(f"Wrote {path} ({count} rows)")
        return path

    def write_key_values(self, name: str, pairs: Iterable[Tuple[str, Any]],
                         metadata: Optional[Mapping[str, Any]] = None) -> Path:
        path = self._path(name)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            for line in self._metadata_lines(metadata):
                handle.write(line)
            for key, value in pairs:
                handle.write(f"{key} = {self._format.cell(value)}\n")
        logger.info(f"Wrote {path}")
        return path

    def write_manifest(self, config: Dict[str, Any]) -> Path:
        """Flat TOML document; None entries are omitted so defaults apply on re-run"""
        path = self._path(MANIFEST_NAME)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            for line in self._metadata_lines(None):
                handle.write(line)
            for key, value in config.items():
                if value is None:
                    continue
                handle.write(f"{self._format.key(key)} = {self._format.toml(value)}\n")
        logger.info(f"Wrote {path}")
        return path

    def emit_plotdata(self, name: str, series: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
                      abscissa: str = "t", metadata: Optional[Mapping[str, Any]] = None) -> Path:
        def rows():
            for label, (xs, values) in series.items():
                for x, value in zip(np.ravel(xs), np.ravel(values)):
                    yield label, x, value

        return self.write_csv(name, ["series", abscissa, "value"], rows(), metadata)
