"""Decreasing sorted counters.

Named non-negative counters kept in a dense array sorted by value
(largest first). Each distinct value owns one contiguous block of the
array, so a counter moves between blocks with a single swap and every
query below is answered without scanning.
"""

from __future__ import annotations

from typing import Hashable, Iterator


class ContractViolation(RuntimeError):
    """Raised when a caller breaks a documented precondition."""


class DSC:
    """Counters sorted by decreasing value with O(1) updates and queries.

    >>> c = DSC()
    >>> for name in "aaab":
    ...     _ = c.increase(name)
    >>> c.values()
    [3, 1]
    >>> c.count_greater_than(1), c.median_value()
    (1, 1)
    """

    __slots__ = ("_names", "_values", "_pos", "_blocks", "_total", "ops")

    def __init__(self) -> None:
        self._names: list = []
        self._values: list[int] = []
        self._pos: dict = {}
        # value -> [start, length]
        self._blocks: dict[int, list[int]] = {}
        self._total = 0
        self.ops = 0

    def increase(self, name: Hashable) -> int:
        self.ops += 1
        self._total += 1
        names, values, blocks = self._names, self._values, self._blocks
        i = self._pos.get(name)
        if i is None:
            # 1 is the smallest stored value, so the tail is its block.
            n = len(names)
            names.append(name)
            values.append(1)
            self._pos[name] = n
            block = blocks.get(1)
            if block is None:
                blocks[1] = [n, 1]
            else:
                block[1] += 1
            return 1

        v = values[i]
        block = blocks[v]
        head = block[0]
        other = names[head]
        names[head], names[i] = name, other
        self._pos[name] = head
        self._pos[other] = i
        values[head] = v + 1
        if block[1] == 1:
            del blocks[v]
        else:
            block[0] += 1
            block[1] -= 1
        up = blocks.get(v + 1)
        if up is None:
            blocks[v + 1] = [head, 1]
        else:
            up[1] += 1
        return v + 1

    def decrease(self, name: Hashable) -> int:
        self.ops += 1
        i = self._pos.get(name)
        if i is None:
            raise ContractViolation(f"decrease of unknown counter {name!r}")
        self._total -= 1
        names, values, blocks = self._names, self._values, self._blocks
        v = values[i]
        block = blocks[v]
        tail = block[0] + block[1] - 1
        other = names[tail]
        names[tail], names[i] = name, other
        self._pos[other] = i
        if block[1] == 1:
            del blocks[v]
        else:
            block[1] -= 1
        if v == 1:
            # the value-1 block sits at the end of the array
            names.pop()
            values.pop()
            del self._pos[name]
            return 0
        self._pos[name] = tail
        values[tail] = v - 1
        down = blocks.get(v - 1)
        if down is None:
            blocks[v - 1] = [tail, 1]
        else:
            down[0] = tail
            down[1] += 1
        return v - 1

    def value(self, name: Hashable) -> int:
        self.ops += 1
        i = self._pos.get(name)
        return 0 if i is None else self._values[i]

    def __contains__(self, name: Hashable) -> bool:
        return name in self._pos

    def __len__(self) -> int:
        return len(self._names)

    def size(self) -> int:
        self.ops += 1
        return len(self._names)

    def sum(self) -> int:
        self.ops += 1
        return self._total

    def max_value(self) -> int:
        self.ops += 1
        return self._values[0] if self._values else 0

    def median_value(self) -> int:
        """Value at position ``size // 2`` of the decreasing order, 0 when empty."""
        self.ops += 1
        values = self._values
        return values[len(values) // 2] if values else 0

    def count_with_value(self, v: int) -> int:
        self.ops += 1
        block = self._blocks.get(v)
        return 0 if block is None else block[1]

    def count_greater_than(self, v: int) -> int:
        """Number of counters strictly above ``v``.

        Only ``v == 0`` or a value currently held by some counter is
        supported; anything else would need an ordered index.
        """
        self.ops += 1
        if v == 0:
            return len(self._names)
        block = self._blocks.get(v)
        if block is None:
            raise ContractViolation(f"count_greater_than({v}): no counter holds this value")
        return block[0]

    def values(self) -> list[int]:
        return list(self._values)

    def items(self) -> Iterator[tuple[Hashable, int]]:
        return zip(list(self._names), list(self._values))

    def dump(self) -> str:
        """Tab-separated ``name value`` lines in array order."""
        return "".join(f"{name}\t{value}\n" for name, value in self.items())

    def check(self) -> None:
        """Verify every structural invariant; raises AssertionError."""
        names, values = self._names, self._values
        assert len(names) == len(values) == len(self._pos)
        assert all(values[k] >= values[k + 1] for k in range(len(values) - 1))
        assert all(v >= 1 for v in values)
        assert sum(values) == self._total
        for k, name in enumerate(names):
            assert self._pos[name] == k
        seen = 0
        for v, (start, length) in self._blocks.items():
            assert length >= 1
            assert all(values[k] == v for k in range(start, start + length))
            assert start == 0 or values[start - 1] > v
            end = start + length
            assert end == len(values) or values[end] < v
            seen += length
        assert seen == len(values)
