from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple


class ArtifactRepositoryInterface(ABC):
    """
    Abstract interface for run artifacts: CSV tables, key-value documents,
    the run manifest and long-format plot data.
    """

    @abstractmethod
    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
                  metadata: Optional[Mapping[str, Any]] = None) -> Path:
        """Write a table with '#'-prefixed metadata lines above the header row"""
        pass

    @abstractmethod
    def write_key_values(self, name: str, pairs: Iterable[Tuple[str, Any]],
                         metadata: Optional[Mapping[str, Any]] = None) -> Path:
        """Write a flat 'key = value' document"""
        pass

    @abstractmethod
    def write_manifest(self, config: Dict[str, Any]) -> Path:
        """Write manifest.txt echoing the resolved run configuration"""
        pass

    @abstractmethod
    def emit_plotdata(self, name: str, series: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
                      abscissa: str = "t", metadata: Optional[Mapping[str, Any]] = None) -> Path:
        """Tidy long-format CSV with columns (series, abscissa, value)"""
        pass
