from collections import Counter
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator


def proposition_key(symbol: str) -> tuple:
    """
    Global proposition order used for canonical labels: the room digit first,
    then the carrying marker "*", then letters alphabetically with the lowercase
    visibility event before its uppercase achievement event ("0Abc", "0*k", "3bB").
    """
    if symbol.isdigit():
        return (0, symbol, 0)
    if symbol == "*":
        return (1, symbol, 0)
    return (2, symbol.lower(), int(symbol.isupper()))


def _check_symbol(symbol: str) -> None:
    if len(symbol) != 1 or not (symbol.isalnum() or symbol == "*") or not symbol.isascii():
        raise ValueError(f"Invalid proposition {symbol!r}.")


@dataclass(frozen=True)
class LabelString:
    """
    Multiset of propositions emitted by a labeling function on one step.
    Instances are always stored in canonical order, so equality and hashing
    follow multiset semantics and serialization is unique.
    """

    events: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        events = tuple(sorted(self.events, key=proposition_key))
        for symbol in events:
            _check_symbol(symbol)
        if sum(symbol.isdigit() for symbol in events) > 1:
            raise ValueError(f"Label {''.join(events)!r} holds more than one room digit.")
        object.__setattr__(self, "events", events)

    @classmethod
    def parse(cls, text: str) -> "LabelString":
        """Parse a label from its serialization, in any symbol order."""
        return cls(tuple(text.strip()))

    def serialize(self) -> str:
        return "".join(self.events)

    def __str__(self) -> str:
        return self.serialize()

    def __repr__(self) -> str:
        return f"LabelString({self.serialize()!r})"

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[str]:
        return iter(self.events)

    def __contains__(self, symbol: object) -> bool:
        return symbol in self.events

    @property
    def room(self) -> str | None:
        """The room digit of the label, if any."""
        for symbol in self.events:
            if symbol.isdigit():
                return symbol
        return None

    def counts(self) -> Counter:
        return Counter(self.events)

    def without(self, symbols: Iterable[str]) -> "LabelString":
        """Remove every occurrence of the given propositions."""
        removed = set(symbols)
        return LabelString(tuple(s for s in self.events if s not in removed))

    def is_submultiset_of(self, other: "LabelString") -> bool:
        mine, theirs = self.counts(), other.counts()
        return all(theirs[s] >= n for s, n in mine.items())

    def submultisets(self) -> list["LabelString"]:
        """
        Every sub-multiset of the label, including the empty label and the label
        itself, in canonical serialization order.
        """
        counts = sorted(self.counts().items(), key=lambda kv: proposition_key(kv[0]))
        subsets = set()
        for picks in product(*(range(n + 1) for _, n in counts)):
            events = tuple(s for (s, _), k in zip(counts, picks) for _ in range(k))
            subsets.add(LabelString(events))
        return sorted(subsets, key=LabelString.serialize)

    def proper_submultisets(self) -> list["LabelString"]:
        return [s for s in self.submultisets() if s != self]


EMPTY = LabelString()
