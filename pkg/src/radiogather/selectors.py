"""Strong selectors and half-selectors: construction, verification, schedules.

A family (S_0, ..., S_{l-1}) is used cyclically: node w transmits at step
tau iff w is in S_{tau mod l}.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

STRONG = "strong"
HALF = "half"

DEFAULT_C_STRONG = 16
DEFAULT_C_HALF = 16
DEFAULT_VERIFY_BUDGET = 10**9
DEFAULT_ATTEMPTS = 8


def log2_ceil(n: int) -> int:
    """ceil(log2 n), never below 1 so that length formulas stay positive."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


@dataclass(frozen=True)
class SelectorFamily:
    n: int
    k: int
    kind: str
    sets: tuple[frozenset[int], ...]
    verified: bool = False
    construction: str = "given"

    def __post_init__(self):
        if self.kind not in (STRONG, HALF):
            raise ValueError(f"unknown selector kind {self.kind!r}")
        sets = tuple(frozenset(s) for s in self.sets)
        for s in sets:
            for x in s:
                if not 0 <= x < self.n:
                    raise ValueError(f"label {x} outside [0, {self.n})")
        object.__setattr__(self, "sets", sets)

    @property
    def length(self) -> int:
        return len(self.sets)

    def __len__(self) -> int:
        return len(self.sets)

    @cached_property
    def _positions(self) -> tuple[tuple[int, ...], ...]:
        pos: list[list[int]] = [[] for _ in range(self.n)]
        for i, s in enumerate(self.sets):
            for x in s:
                pos[x].append(i)
        return tuple(tuple(p) for p in pos)

    @cached_property
    def membership(self) -> np.ndarray:
        m = np.zeros((max(self.length, 1), self.n), dtype=bool)
        for i, s in enumerate(self.sets):
            if s:
                m[i, list(s)] = True
        return m[: self.length]

    def transmits(self, node: int, step: int) -> bool:
        return bool(self.sets) and node in self.sets[step % self.length]

    def next_transmit(self, node: int, step: int) -> int | None:
        """Smallest step' >= step at which `node` transmits, or None if never."""
        pos = self._positions[node]
        if not pos:
            return None
        i0 = step % self.length
        k = bisect.bisect_left(pos, i0)
        if k < len(pos):
            return step + pos[k] - i0
        return step + self.length - i0 + pos[0]

    def padded(self, length: int) -> "SelectorFamily":
        if length < self.length:
            raise ValueError(f"cannot pad a family of length {self.length} down to {length}")
        extra = (frozenset(),) * (length - self.length)
        return replace(self, sets=self.sets + extra)


def schedule_transmits(f: SelectorFamily, node: int, step: int) -> bool:
    if not 0 <= node < f.n:
        raise ValueError(f"node {node} outside [0, {f.n})")
    return f.transmits(node, step)


# -- verification -------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    status: str  # "pass", "fail", "infeasible", "no-counterexample"
    witness_set: frozenset[int] | None = None
    witness_element: int | None = None
    checked: int = 0

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "no-counterexample")

    def __str__(self) -> str:
        if self.status == "fail":
            return f"fail(X={sorted(self.witness_set)}, x={self.witness_element})"
        return self.status


def enumeration_cost(n: int, k: int, length: int, kind: str = STRONG) -> int:
    k = min(k, n)
    if kind == STRONG:
        return math.comb(n, k) * k * max(length, 1)
    return sum(math.comb(n, s) * s for s in range(1, k + 1)) * max(length, 1)


def _isolated(m: np.ndarray, combos: np.ndarray) -> np.ndarray:
    """For each row X of `combos`, which members are singled out by some set."""
    if m.shape[0] == 0:
        return np.zeros(combos.shape, dtype=bool)
    sub = m[:, combos]  # (l, batch, s)
    single = sub.sum(axis=2) == 1
    return (sub & single[:, :, None]).any(axis=0)


def _combo_batches(n: int, s: int, batch: int) -> Iterator[np.ndarray]:
    it = combinations(range(n), s)
    while True:
        chunk = [c for _, c in zip(range(batch), it)]
        if not chunk:
            return
        yield np.array(chunk, dtype=np.intp)


def _exhaustive(f: SelectorFamily, k: int, need) -> Verdict:
    m = f.membership
    checked = 0
    for s in range(1, min(k, f.n) + 1):
        batch = max(1, 2_000_000 // max(1, f.length * s))
        for combos in _combo_batches(f.n, s, batch):
            iso = _isolated(m, combos)
            good = iso.sum(axis=1) >= need(s)
            checked += len(combos)
            if not good.all():
                row = int(np.argmin(good))
                members = combos[row]
                missing = [int(x) for x, ok in zip(members, iso[row]) if not ok]
                return Verdict("fail", frozenset(int(x) for x in members), missing[0], checked)
    return Verdict("pass", checked=checked)


def verify_strong_selector(f: SelectorFamily, budget: int = DEFAULT_VERIFY_BUDGET) -> Verdict:
    """Exhaustively check that every x in every X with |X| <= k is singled out.

    Sizes are scanned from 1 upwards, so a returned witness is smallest.
    """
    if enumeration_cost(f.n, f.k, f.length, STRONG) > budget:
        return Verdict("infeasible")
    return _exhaustive(f, f.k, lambda s: s)


def verify_half_selector(f: SelectorFamily, budget: int = DEFAULT_VERIFY_BUDGET) -> Verdict:
    """Exhaustively check that at least ceil(|X|/2) members of each X are singled out."""
    if enumeration_cost(f.n, f.k, f.length, HALF) > budget:
        return Verdict("infeasible")
    return _exhaustive(f, f.k, lambda s: (s + 1) // 2)


def verify(f: SelectorFamily, budget: int = DEFAULT_VERIFY_BUDGET) -> Verdict:
    if f.kind == STRONG:
        return verify_strong_selector(f, budget)
    return verify_half_selector(f, budget)


def verify_sampled(f: SelectorFamily, trials: int, seed: int = 0) -> Verdict:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng([seed, f.n, f.k, 0x5E1])
    m = f.membership
    kmax = min(f.k, f.n)
    need = (lambda s: s) if f.kind == STRONG else (lambda s: (s + 1) // 2)
    sizes = rng.integers(1, kmax + 1, size=trials)
    done = 0
    for s in range(1, kmax + 1):
        count = int((sizes == s).sum())
        if not count:
            continue
        keys = rng.random((count, f.n))
        combos = np.argsort(keys, axis=1)[:, :s]
        combos.sort(axis=1)
        batch = max(1, 2_000_000 // max(1, f.length * s))
        for lo in range(0, count, batch):
            part = combos[lo: lo + batch]
            iso = _isolated(m, part)
            good = iso.sum(axis=1) >= need(s)
            if not good.all():
                row = int(np.argmin(good))
                members = part[row]
                missing = [int(x) for x, ok in zip(members, iso[row]) if not ok]
                return Verdict("fail", frozenset(int(x) for x in members), missing[0], done + row + 1)
            done += len(part)
    return Verdict("no-counterexample", checked=trials)


# -- construction -------------------------------------------------------------

def singleton_family(n: int, k: int, kind: str, length: int) -> SelectorFamily:
    """RoundRobin as a selector: {0}, ..., {n-1} padded with empty sets."""
    if length < n:
        raise ValueError(f"singleton fallback needs length >= n ({length} < {n})")
    sets = tuple(frozenset([x]) for x in range(n)) + (frozenset(),) * (length - n)
    return SelectorFamily(n, k, kind, sets, verified=True, construction="singletons")


def _random_family(n: int, k: int, kind: str, length: int, seed: int, attempt: int) -> SelectorFamily:
    rng = np.random.default_rng([seed, n, k, length, attempt, 0 if kind == STRONG else 1])
    m = rng.random((length, n)) < 1.0 / k
    sets = tuple(frozenset(np.flatnonzero(row).tolist()) for row in m)
    return SelectorFamily(n, k, kind, sets, verified=False, construction=f"random#{attempt}")


def _build(kind: str, n: int, k: int, target_length: int, seed: int, *,
           fallback: str, budget: int, attempts: int) -> SelectorFamily:
    if not 1 <= k <= n:
        raise ValueError(f"strength k={k} must satisfy 1 <= k <= n={n}")
    if target_length < 1:
        raise ValueError("target_length must be >= 1")
    if k == 1:
        # one set [n] singles out the only member of any singleton
        sets = (frozenset(range(n)),) + (frozenset(),) * (target_length - 1)
        return SelectorFamily(n, k, kind, sets, verified=True, construction="full-set")
    if fallback == "always" and target_length >= n:
        return singleton_family(n, k, kind, target_length)
    feasible = enumeration_cost(n, k, target_length, kind) <= budget
    if fallback == "auto" and not feasible and target_length >= n:
        return singleton_family(n, k, kind, target_length)
    fam = None
    for attempt in range(attempts):
        fam = _random_family(n, k, kind, target_length, seed, attempt)
        if not feasible:
            return fam
        if verify(fam, budget).status == "pass":
            return replace(fam, verified=True)
    if target_length >= n and fallback != "never":
        return singleton_family(n, k, kind, target_length)
    return fam


def build_strong_selector(n: int, k: int, target_length: int, seed: int = 0, *,
                          fallback: str = "auto", budget: int = DEFAULT_VERIFY_BUDGET,
                          attempts: int = DEFAULT_ATTEMPTS) -> SelectorFamily:
    """Build a strong (n, k)-selector with exactly `target_length` sets.

    fallback: "auto" uses the singleton family when the random family cannot be
    verified exhaustively and there is room (target_length >= n); "always"
    prefers singletons whenever they fit; "never" always returns the random
    family. A returned random family has verified=True only if exhaustive
    verification passed.
    """
    return _build(STRONG, n, k, target_length, seed, fallback=fallback, budget=budget, attempts=attempts)


def build_half_selector(n: int, k: int, target_length: int, seed: int = 0, *,
                        fallback: str = "auto", budget: int = DEFAULT_VERIFY_BUDGET,
                        attempts: int = DEFAULT_ATTEMPTS) -> SelectorFamily:
    return _build(HALF, n, k, target_length, seed, fallback=fallback, budget=budget, attempts=attempts)


@dataclass(frozen=True)
class SelectorLadder:
    n: int
    kind: str
    constant: int
    families: tuple[SelectorFamily, ...]
    strength_offset: int = 0
    lengths: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(f.length for f in self.families))

    def __getitem__(self, j: int) -> SelectorFamily:
        return self.families[j]

    def __len__(self) -> int:
        return len(self.families)

    @property
    def all_verified(self) -> bool:
        return all(f.verified for f in self.families)


def strong_ladder_length(n: int, j: int, c_s: int) -> int:
    return c_s * 4**j * log2_ceil(n)


def half_ladder_length(n: int, j: int, c_h: int) -> int:
    return c_h * 2**j * log2_ceil(n)


def build_strong_ladder(n: int, max_j: int, c_s: int = DEFAULT_C_STRONG, seed: int = 0, *,
                        strength_offset: int = 0, fallback: str = "auto",
                        budget: int = DEFAULT_VERIFY_BUDGET) -> SelectorLadder:
    """Strong selectors for strengths 2^j (+ offset), j = 0..max_j, of length c_s 4^j L."""
    fams = []
    for j in range(max_j + 1):
        k = min(n, 2**j + strength_offset)
        fams.append(build_strong_selector(n, k, strong_ladder_length(n, j, c_s), seed + j,
                                          fallback=fallback, budget=budget))
    return SelectorLadder(n, STRONG, c_s, tuple(fams), strength_offset)


def build_half_ladder(n: int, max_j: int, c_h: int = DEFAULT_C_HALF, seed: int = 0, *,
                      fallback: str = "auto", budget: int = DEFAULT_VERIFY_BUDGET) -> SelectorLadder:
    fams = []
    for j in range(max_j + 1):
        k = min(n, 2**j)
        fams.append(build_half_selector(n, k, half_ladder_length(n, j, c_h), seed + j,
                                        fallback=fallback, budget=budget))
    return SelectorLadder(n, HALF, c_h, tuple(fams))


# -- file format --------------------------------------------------------------

def format_family(f: SelectorFamily) -> str:
    lines = [f"{f.kind} {f.n} {f.k} {f.length}"]
    lines.extend(" ".join(str(x) for x in sorted(s)) for s in f.sets)
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> SelectorFamily:
    lines = text.split("\n")
    header = lines[0].split()
    if len(header) != 4:
        raise ValueError(f"bad selector header {lines[0]!r}; expected 'kind n k length'")
    kind, n, k, length = header[0], int(header[1]), int(header[2]), int(header[3])
    body = lines[1:1 + length]
    if len(body) < length:
        raise ValueError(f"selector file declares {length} sets but has {len(body)}")
    sets = [frozenset(int(x) for x in line.split()) for line in body]
    return SelectorFamily(n, k, kind, tuple(sets))


def read_family(path: str | Path) -> SelectorFamily:
    return parse_family(Path(path).read_text())


def write_family(f: SelectorFamily, path: str | Path) -> None:
    Path(path).write_text(format_family(f))


def family_from_sets(n: int, k: int, kind: str, sets: Sequence[Sequence[int]]) -> SelectorFamily:
    return SelectorFamily(n, k, kind, tuple(frozenset(s) for s in sets))
