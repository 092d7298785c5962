"""
Counter-based random streams.

Every simulated path owns a Philox generator keyed by (seed, path index), so
the normal increments of a path depend only on those two numbers and never
on how paths are grouped into blocks or spread over workers.
"""

from typing import List

import numpy as np

_MASK64 = (1 << 64) - 1


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Independent generator for one path"""
    key = np.array([int(seed) & _MASK64, int(path_index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def block_generators(seed: int, first_path: int, count: int) -> List[np.random.Generator]:
    """Generators for paths first_path .. first_path + count - 1"""
    return [path_generator(seed, first_path + offset) for offset in range(count)]


def draw_normals(generators: List[np.random.Generator], steps: int, width: int) -> np.ndarray:
    """
    Standard normals of shape (paths, steps, width). Each path consumes its own
    stream in step order, so consecutive chunks concatenate to one long draw.
    """
    return np.stack([generator.standard_normal((steps, width)) for generator in generators])
