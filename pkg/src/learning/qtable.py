from typing import Hashable, Iterable, Iterator, Mapping

import numpy as np

N_ACTIONS = 4


class QTable:
    """
    One sparse action-value table per reward machine state. Rows are created on
    first update; reads of unseen observation keys return the state's initial value
    without inserting. The initial value is 0 unless given, either as one number or
    per reward machine state.
    """

    def __init__(self, rm_states: Iterable[str], n_actions: int = N_ACTIONS, init: float | Mapping[str, float] = 0.0) -> None:
        self.n_actions = n_actions
        self.tables: dict[str, dict[Hashable, np.ndarray]] = {u: {} for u in rm_states}
        if isinstance(init, Mapping):
            self.init = {u: float(init[u]) for u in self.tables}
        else:
            self.init = {u: float(init) for u in self.tables}
        self._init_rows = {}
        for u, value in self.init.items():
            row = np.full(n_actions, value)
            row.setflags(write=False)
            self._init_rows[u] = row

    def row(self, u: str, obs_key: Hashable) -> np.ndarray:
        return self.tables[u].get(obs_key, self._init_rows[u])

    def writable_row(self, u: str, obs_key: Hashable) -> np.ndarray:
        table = self.tables[u]
        if obs_key not in table:
            table[obs_key] = np.full(self.n_actions, self.init[u])
        return table[obs_key]

    def value(self, u: str, obs_key: Hashable, action: int) -> float:
        return float(self.row(u, obs_key)[action])

    def set_value(self, u: str, obs_key: Hashable, action: int, value: float) -> None:
        self.writable_row(u, obs_key)[action] = value

    def max_value(self, u: str, obs_key: Hashable) -> float:
        row = self.tables[u].get(obs_key)
        return self.init[u] if row is None else float(row.max())

    def entries(self) -> Iterator[tuple[str, Hashable, int, float]]:
        """Entries differing from their initial value, in a stable order."""
        for u in sorted(self.tables):
            for obs_key in sorted(self.tables[u], key=str):
                for action, value in enumerate(self.tables[u][obs_key]):
                    if value != self.init[u]:
                        yield u, obs_key, action, float(value)

    def __len__(self) -> int:
        return sum(len(t) for t in self.tables.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return self.init == other.init and list(self.entries()) == list(other.entries())

    def copy(self) -> "QTable":
        clone = QTable(self.tables, self.n_actions, self.init)
        for u, table in self.tables.items():
            clone.tables[u] = {k: row.copy() for k, row in table.items()}
        return clone
