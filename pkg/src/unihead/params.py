"""Named, ordered parameter collection with UHT-directory serialization."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .numkit import tensorio

MANIFEST = "manifest.json"


class ParamStore:
    """Insertion-ordered mapping name -> ndarray. Arrays are shared with the
    head that was built from the store, so in-place edits are visible to
    subsequent forwards."""

    def __init__(self):
        self._arrays: dict[str, np.ndarray] = {}

    def add(self, name: str, arr: np.ndarray) -> np.ndarray:
        if name in self._arrays:
            raise ConfigError(f"duplicate parameter name {name!r}")
        self._arrays[name] = np.asarray(arr)
        return self._arrays[name]

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    def names(self):
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    def total_params(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def equal_bits(self, other: "ParamStore") -> bool:
        if self.names() != other.names():
            return False
        return all(a.tobytes() == other._arrays[k].tobytes()
                   for k, a in self._arrays.items())

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        index = {}
        for name, arr in self._arrays.items():
            fname = name + ".uht"
            tensorio.write_tensor(directory / fname, arr)
            index[name] = {"file": fname, "shape": list(arr.shape),
                           "dtype": str(arr.dtype)}
        manifest = {"tool_version": __version__, "params": index}
        # insertion order is the creation order; keep it (no key sorting)
        (directory / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "ParamStore":
        directory = Path(directory)
        manifest = json.loads((directory / MANIFEST).read_text())
        store = cls()
        for name, meta in manifest["params"].items():
            store.add(name, tensorio.read_tensor(directory / meta["file"]))
        return store
