"""Merge edition and media variants of the same title into one canonical item.

The rule set: normalize titles/creators, sort lexicographically, compare each
row against the next ten, pair rows whose titles and creators are both within
edit distance 1 and whose edition digits agree (a missing digit counts as
edition 1), then take the transitive closure of the pairs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

DEFAULT_WINDOW = 10
DEFAULT_MAX_EDIT = 1

_STRIP_RE = re.compile(r"[^0-9a-z ]+")
_SPACE_RE = re.compile(r" +")


def normalize_text(text: str) -> str:
    """Lowercase, drop anything that is not a letter, digit or space, collapse runs of spaces."""
    cleaned = _STRIP_RE.sub(" ", text.lower())
    return _SPACE_RE.sub(" ", cleaned).strip()


def digit_token(title_norm: str) -> str | None:
    """Edition marker: the last all-digit word of the normalized title.

    Only digit runs of length 1 or 2 qualify; a title containing any longer
    run (a year, an ISBN fragment) carries no marker at all.
    """
    token = None
    for word in title_norm.split(" "):
        if word.isdigit():
            if len(word) > 2:
                return None
            token = word
    return token


def _strip_digit_token(title_norm: str, token: str) -> str:
    words = title_norm.split(" ")
    for i in range(len(words) - 1, -1, -1):
        if words[i] == token:
            del words[i]
            break
    return " ".join(words)


@dataclass(frozen=True)
class RawItem:
    """Normalized view of one catalog row."""

    item_key: str
    title_norm: str
    creator_norm: str
    digit_token: str | None

    @property
    def title_core(self) -> str:
        """Title with the edition digit removed, the basis for edit-distance checks."""
        if self.digit_token is None:
            return self.title_norm
        return _strip_digit_token(self.title_norm, self.digit_token)

    @property
    def edition(self) -> int:
        """Numeric edition, with a missing digit reading as edition 1."""
        return int(self.digit_token) if self.digit_token is not None else 1


def normalize(item_key: str, title: str, creator: str) -> RawItem:
    title_norm = normalize_text(title)
    creator_norm = normalize_text(creator)
    return RawItem(item_key, title_norm, creator_norm, digit_token(title_norm))


def edit_distance_at_most(a: str, b: str, limit: int) -> bool:
    """Levenshtein distance with unit costs, early-exited at the limit."""
    if a == b:
        return True
    la, lb = len(a), len(b)
    if abs(la - lb) > limit:
        return False
    if limit == 1:
        return _within_one(a, b)
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        best = cur0 = i
        row = [cur0]
        ca = a[i - 1]
        for j in range(1, lb + 1):
            cost = prev[j - 1] + (ca != b[j - 1])
            cost = min(cost, prev[j] + 1, row[j - 1] + 1)
            row.append(cost)
            if cost < best:
                best = cost
        if best > limit:
            return False
        prev = row
    return prev[lb] <= limit


def _within_one(a: str, b: str) -> bool:
    la, lb = len(a), len(b)
    if la == lb:
        seen = False
        for x, y in zip(a, b):
            if x != y:
                if seen:
                    return False
                seen = True
        return True
    if la > lb:
        a, b, la, lb = b, a, lb, la
    # one insertion into a
    i = 0
    while i < la and a[i] == b[i]:
        i += 1
    return a[i:] == b[i + 1 :]


def candidate_pairs(
    items: Sequence[RawItem],
    window: int = DEFAULT_WINDOW,
    max_edit: int = DEFAULT_MAX_EDIT,
) -> list[tuple[RawItem, RawItem]]:
    """All variant pairs within a forward window of the sorted item list.

    ``items`` must be sorted by (title_norm, creator_norm) and hold one row
    per distinct normalized signature. A pair qualifies when the digit-free
    title cores and the creators are each within ``max_edit`` and the
    edition digits agree.
    """
    pairs = []
    n = len(items)
    for i in range(n):
        a = items[i]
        a_core = a.title_core
        a_ed = a.edition
        for j in range(i + 1, min(i + 1 + window, n)):
            b = items[j]
            if b.edition != a_ed:
                continue
            if not edit_distance_at_most(a_core, b.title_core, max_edit):
                continue
            if not edit_distance_at_most(a.creator_norm, b.creator_norm, max_edit):
                continue
            pairs.append((a, b))
    return pairs


class _DisjointSet:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def add(self, x: str):
        if x not in self.parent:
            self.parent[x] = x

    def find(self, x: str) -> str:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: str, b: str):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass
class CanonicalCatalog:
    """Partition of raw item keys into canonical items.

    The canonical id of a group is its lexicographically smallest item key.
    """

    mapping: dict[str, str]
    groups: dict[str, list[str]]

    def canonical(self, item_key: str) -> str:
        return self.mapping.get(item_key, item_key)

    @property
    def n_items(self) -> int:
        return len(self.mapping)

    @property
    def n_canonical(self) -> int:
        return len(self.groups)


def build_catalog(
    all_keys: Iterable[str], pairs: Iterable[tuple[str, str]]
) -> CanonicalCatalog:
    """Disjoint-set closure of pairs over the full key universe."""
    ds = _DisjointSet()
    for key in all_keys:
        ds.add(key)
    for a, b in pairs:
        ds.add(a)
        ds.add(b)
        ds.union(a, b)
    members: dict[str, list[str]] = {}
    for key in ds.parent:
        members.setdefault(ds.find(key), []).append(key)
    mapping: dict[str, str] = {}
    groups: dict[str, list[str]] = {}
    for bunch in members.values():
        bunch.sort()
        canon_id = bunch[0]
        groups[canon_id] = bunch
        for key in bunch:
            mapping[key] = canon_id
    return CanonicalCatalog(mapping, groups)


def canonicalize(
    rows: Iterable[tuple[str, str, str]],
    window: int = DEFAULT_WINDOW,
    max_edit: int = DEFAULT_MAX_EDIT,
) -> CanonicalCatalog:
    """Full pipeline over (item_key, title, creator) rows.

    Rows sharing an identical normalized signature collapse into one slot
    before the windowed comparison, then pairing operates on the distinct,
    sorted signatures.
    """
    by_signature: dict[tuple[str, str], list[str]] = {}
    for key, title, creator in rows:
        item = normalize(key, title, creator)
        by_signature.setdefault((item.title_norm, item.creator_norm), []).append(key)

    signatures = sorted(by_signature)
    distinct = [
        RawItem(min(by_signature[sig]), sig[0], sig[1], digit_token(sig[0]))
        for sig in signatures
    ]
    pair_keys = [(a.item_key, b.item_key) for a, b in candidate_pairs(distinct, window, max_edit)]

    all_keys: list[str] = []
    same_signature: list[tuple[str, str]] = []
    for sig in signatures:
        keys = by_signature[sig]
        all_keys.extend(keys)
        head = min(keys)
        same_signature.extend((head, k) for k in keys if k != head)

    return build_catalog(all_keys, pair_keys + same_signature)
