"""Per-round trial data kept by the protocol harnesses."""

from collections.abc import Iterator
from pathlib import Path

import numpy as np


class ProtocolRecords:
    """Column-oriented per-round records (one integer array per column)."""

    def __init__(self, columns: dict[str, np.ndarray]):
        lengths = {len(values) for values in columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"Record columns have different lengths: {sorted(lengths)}")
        self.columns = {name: np.asarray(values, dtype=np.int64) for name, values in columns.items()}

    @classmethod
    def concatenate(cls, blocks: list[dict[str, np.ndarray]]) -> "ProtocolRecords":
        names = blocks[0].keys() if blocks else ()
        return cls({name: np.concatenate([block[name] for block in blocks]) for name in names})

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()), ()))

    def rows(self) -> Iterator[dict[str, int]]:
        for index in range(len(self)):
            yield {name: int(values[index]) for name, values in self.columns.items()}

    def to_csv(self, path: str | Path) -> None:
        table = np.column_stack(list(self.columns.values())) if self.columns else np.empty((0, 0))
        np.savetxt(path, table, fmt="%d", delimiter=",", header=",".join(self.columns), comments="")
