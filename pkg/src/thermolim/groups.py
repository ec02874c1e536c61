"""Finitely generated groups as Cayley graphs.

Two groups are built in: the lattice Z^d with generators {±e_i} and the
discrete Heisenberg group with generators {x^±1, y^±1}. Elements are integer
coordinate tuples; the Heisenberg product is

    (x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y').

Edges of the Cayley graph join v and s v for generators s. Translations act
from the right (v -> v g^-1, sets L -> L g), and with left edges these right
translations are graph automorphisms; the word metric dist(v, w) = |w v^-1|
is right invariant. On Z^d both sides agree.

Site sets are stored as sorted int64 keys. A key packs the coordinates with
the first coordinate most significant, so key order is lexicographic order.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ResourceError, UsageError

# refuse to expand lazy boxes or BFS balls beyond this many sites
MAX_MATERIALIZE = 50_000_000


class Group:
    """Z^d (``kind="zd"``) or the discrete Heisenberg group (``kind="heisenberg"``)."""

    def __init__(self, kind: str, d: int | None = None):
        if kind == "zd":
            if d is None or int(d) < 1:
                raise UsageError("Z^d needs a dimension d >= 1")
            d = int(d)
            pos = np.eye(d, dtype=np.int64)
        elif kind == "heisenberg":
            d = 3
            pos = np.array([[1, 0, 0], [0, 1, 0]], dtype=np.int64)
        else:
            raise UsageError(f"unknown group kind {kind!r}")
        self.kind = kind
        self.dim = d
        self.positive_generators = pos
        gens = np.concatenate([pos, self.inv(pos)])
        self.generators = gens
        self._bits = 63 // d
        self._offset = 1 << (self._bits - 1)
        self._check_generators()

    @classmethod
    def zd(cls, d: int) -> "Group":
        return cls("zd", d)

    @classmethod
    def heisenberg(cls) -> "Group":
        return cls("heisenberg")

    def _check_generators(self) -> None:
        gens = {tuple(g) for g in self.generators.tolist()}
        inverses = {tuple(g) for g in self.inv(self.generators).tolist()}
        if gens != inverses:
            raise UsageError("generating set must be symmetric")
        if self.identity in gens:
            raise UsageError("generating set must not contain the identity")

    @property
    def degree(self) -> int:
        """Number of generators, i.e. the vertex degree of the Cayley graph."""
        return len(self.generators)

    @property
    def lattice_dimension(self) -> int:
        """d for Z^d; for Heisenberg the number of generator pairs (2)."""
        return len(self.positive_generators)

    @property
    def identity(self) -> tuple:
        return (0,) * self.dim

    def __eq__(self, other) -> bool:
        return isinstance(other, Group) and (self.kind, self.dim) == (other.kind, other.dim)

    def __hash__(self) -> int:
        return hash((self.kind, self.dim))

    def __repr__(self) -> str:
        return "Group.heisenberg()" if self.kind == "heisenberg" else f"Group.zd({self.dim})"

    def to_config(self) -> dict:
        return {"group": "zd", "d": self.dim} if self.kind == "zd" else {"group": "heisenberg"}

    # vectorized arithmetic on (..., dim) integer arrays

    def mul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = a + b
        if self.kind == "heisenberg":
            out[..., 2] += a[..., 0] * b[..., 1]
        return out

    def inv(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        out = -a
        if self.kind == "heisenberg":
            out[..., 2] += a[..., 0] * a[..., 1]
        return out

    # elements

    def element(self, coords: Iterable[int]) -> "GroupElement":
        c = tuple(int(x) for x in coords)
        if len(c) != self.dim:
            raise UsageError(f"{self!r} elements have {self.dim} coordinates, got {len(c)}")
        return GroupElement(self, c)

    def coords_of(self, g) -> tuple:
        """Coordinates of ``g`` (a GroupElement of this group or a plain sequence)."""
        if isinstance(g, GroupElement):
            if g.group != self:
                raise UsageError(f"element of {g.group!r} used with {self!r}")
            return g.coords
        c = tuple(int(x) for x in g)
        if len(c) != self.dim:
            raise UsageError(f"{self!r} elements have {self.dim} coordinates, got {len(c)}")
        return c

    def multiply(self, g, h) -> "GroupElement":
        if isinstance(g, GroupElement) and isinstance(h, GroupElement) and g.group != h.group:
            raise UsageError("cannot multiply elements of different groups")
        a, b = self.coords_of(g), self.coords_of(h)
        return GroupElement(self, tuple(int(x) for x in self.mul(a, b)))

    def inverse(self, g) -> "GroupElement":
        return GroupElement(self, tuple(int(x) for x in self.inv(self.coords_of(g))))

    # packed keys

    def encode(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64).reshape(-1, self.dim)
        if c.size and (c.min() < -self._offset or c.max() >= self._offset):
            raise ResourceError("coordinates exceed the packed key range")
        keys = np.zeros(len(c), dtype=np.int64)
        for i in range(self.dim):
            keys = (keys << self._bits) | (c[:, i] + self._offset)
        return keys

    def decode(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        out = np.empty((len(keys), self.dim), dtype=np.int64)
        mask = (1 << self._bits) - 1
        k = keys.copy()
        for i in range(self.dim - 1, -1, -1):
            out[:, i] = (k & mask) - self._offset
            k >>= self._bits
        return out

    def neighbor_keys(self, keys: np.ndarray) -> np.ndarray:
        """Sorted unique keys of all Cayley neighbors of the given sites."""
        if len(keys) == 0:
            return np.zeros(0, dtype=np.int64)
        c = self.decode(keys)
        nb = self.mul(self.generators[None, :, :], c[:, None, :])
        return np.unique(self.encode(nb.reshape(-1, self.dim)))

    # word metric

    @functools.lru_cache(maxsize=8)
    def _ball_layers(self, radius: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted keys of the ball of given radius and the word length of each."""
        keys = self.encode([self.identity])
        lengths = np.zeros(1, dtype=np.int64)
        frontier = keys
        for step in range(1, radius + 1):
            nb = self.neighbor_keys(frontier)
            new = np.setdiff1d(nb, keys, assume_unique=True)
            if len(keys) + len(new) > MAX_MATERIALIZE:
                raise ResourceError(f"word-metric ball of radius {radius} is too large")
            keys = np.concatenate([keys, new])
            lengths = np.concatenate([lengths, np.full(len(new), step, dtype=np.int64)])
            frontier = new
        order = np.argsort(keys)
        keys, lengths = keys[order], lengths[order]
        keys.flags.writeable = False
        lengths.flags.writeable = False
        return keys, lengths

    def word_lengths(self, coords, cutoff: int) -> np.ndarray:
        """Word lengths of the given elements; -1 where the length exceeds ``cutoff``."""
        c = np.asarray(coords, dtype=np.int64).reshape(-1, self.dim)
        if self.kind == "zd":
            lengths = np.abs(c).sum(axis=1)
            return np.where(lengths <= cutoff, lengths, -1)
        targets = self.encode(c)
        out = np.full(len(targets), -1, dtype=np.int64)
        todo = np.ones(len(targets), dtype=bool)
        seen = self.encode([self.identity])
        frontier = seen
        step = 0
        while True:
            hit = todo & np.isin(targets, frontier)
            out[hit] = step
            todo &= ~hit
            if not todo.any() or step >= cutoff or len(frontier) == 0:
                break
            nb = self.neighbor_keys(frontier)
            frontier = np.setdiff1d(nb, seen, assume_unique=True)
            seen = np.union1d(seen, frontier)
            if len(seen) > MAX_MATERIALIZE:
                raise ResourceError("breadth-first search exceeded the size limit")
            step += 1
        return out


@dataclass(frozen=True)
class GroupElement:
    group: Group
    coords: tuple

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.group.multiply(self, other)

    def inverse(self) -> "GroupElement":
        return self.group.inverse(self)

    def __iter__(self):
        return iter(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def __repr__(self) -> str:
        return f"GroupElement{self.coords}"


class SiteSet:
    """Finite subset of a group with lexicographic iteration order.

    Axis-aligned boxes in canonical coordinates stay lazy (origin and shape)
    until the individual sites are needed, so their sizes and closed-form
    boundary counts work for arbitrarily large sides.
    """

    __slots__ = ("group", "_keys", "_box", "_coords")

    def __init__(self, group: Group, coords=()):
        self.group = group
        c = np.asarray(coords, dtype=np.int64).reshape(-1, group.dim)
        keys = np.unique(group.encode(c))
        keys.flags.writeable = False
        self._keys = keys
        self._box = None
        self._coords = None

    @classmethod
    def from_keys(cls, group: Group, keys, assume_unique: bool = False) -> "SiteSet":
        self = cls.__new__(cls)
        self.group = group
        keys = np.asarray(keys, dtype=np.int64)
        if not assume_unique:
            keys = np.unique(keys)
        keys.flags.writeable = False
        self._keys = keys
        self._box = None
        self._coords = None
        return self

    @classmethod
    def box(cls, group: Group, shape: Sequence[int], origin: Sequence[int] | None = None) -> "SiteSet":
        """The product of coordinate ranges [o_i, o_i + shape_i)."""
        shape = tuple(int(s) for s in shape)
        if len(shape) != group.dim or min(shape) < 0:
            raise UsageError(f"box shape {shape} invalid for {group!r}")
        origin = tuple(int(o) for o in origin) if origin is not None else (0,) * group.dim
        self = cls.__new__(cls)
        self.group = group
        self._keys = None
        self._box = (origin, shape)
        self._coords = None
        return self

    @classmethod
    def cube(cls, group: Group, side: int) -> "SiteSet":
        """Lambda_L = [0, L)^d in Z^d."""
        return cls.box(group, (side,) * group.dim)

    # structure

    @property
    def is_box(self) -> bool:
        return self._box is not None

    @property
    def box_origin(self):
        return self._box[0] if self._box else None

    @property
    def box_shape(self):
        return self._box[1] if self._box else None

    @property
    def keys(self) -> np.ndarray:
        if self._keys is None:
            origin, shape = self._box
            n = math.prod(shape)
            if n > MAX_MATERIALIZE:
                raise ResourceError(f"box with {n} sites is too large to enumerate")
            if n == 0:
                keys = np.zeros(0, dtype=np.int64)
            else:
                grids = np.indices(shape, dtype=np.int64).reshape(self.group.dim, -1).T
                keys = self.group.encode(grids + np.asarray(origin, dtype=np.int64))
            keys.flags.writeable = False
            self._keys = keys
        return self._keys

    @property
    def coords(self) -> np.ndarray:
        if self._coords is None:
            c = self.group.decode(self.keys)
            c.flags.writeable = False
            self._coords = c
        return self._coords

    def __len__(self) -> int:
        if self._keys is None:
            return math.prod(self._box[1])
        return len(self._keys)

    @property
    def size(self) -> int:
        return len(self)

    def __iter__(self) -> Iterator[tuple]:
        for row in self.coords.tolist():
            yield tuple(row)

    def __contains__(self, g) -> bool:
        c = self.group.coords_of(g)
        if self._box is not None:
            origin, shape = self._box
            return all(o <= x < o + s for x, o, s in zip(c, origin, shape))
        return bool(self.contains(np.asarray([c]))[0])

    def index_of(self, coords) -> np.ndarray:
        """Position of each site in iteration order, -1 for non-members."""
        c = np.asarray(coords, dtype=np.int64).reshape(-1, self.group.dim)
        if self._box is not None:
            return self._box_index(c)
        keys = self.keys
        if len(keys) == 0:
            return np.full(len(c), -1, dtype=np.int64)
        try:
            q = self.group.encode(c)
        except ResourceError:
            return self._index_of_slow(c)
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, len(keys) - 1)
        return np.where(keys[pos] == q, pos, -1)

    def _box_index(self, c: np.ndarray) -> np.ndarray:
        origin, shape = self._box
        rel = c - np.asarray(origin, dtype=np.int64)
        inside = np.all((rel >= 0) & (rel < np.asarray(shape, dtype=np.int64)), axis=1)
        idx = np.zeros(len(c), dtype=np.int64)
        for k, s in enumerate(shape):
            idx = idx * s + rel[:, k]
        return np.where(inside, idx, -1)

    def _index_of_slow(self, c: np.ndarray) -> np.ndarray:
        out = np.full(len(c), -1, dtype=np.int64)
        lim = self.group._offset
        ok = np.all((c >= -lim) & (c < lim), axis=1)
        out[ok] = self.index_of(c[ok])
        return out

    def contains(self, coords) -> np.ndarray:
        return self.index_of(coords) >= 0

    def min_element(self) -> tuple:
        if len(self) == 0:
            raise UsageError("empty site set has no minimal element")
        if self._box is not None:
            return self._box[0]
        return tuple(self.group.decode(self.keys[:1])[0].tolist())

    # set algebra

    def _same_group(self, other: "SiteSet") -> None:
        if self.group != other.group:
            raise UsageError("site sets belong to different groups")

    def union(self, other: "SiteSet") -> "SiteSet":
        self._same_group(other)
        return SiteSet.from_keys(self.group, np.union1d(self.keys, other.keys), assume_unique=True)

    def intersection(self, other: "SiteSet") -> "SiteSet":
        self._same_group(other)
        return SiteSet.from_keys(
            self.group, np.intersect1d(self.keys, other.keys, assume_unique=True), assume_unique=True
        )

    def difference(self, other: "SiteSet") -> "SiteSet":
        self._same_group(other)
        return SiteSet.from_keys(
            self.group, np.setdiff1d(self.keys, other.keys, assume_unique=True), assume_unique=True
        )

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def issubset(self, other: "SiteSet") -> bool:
        self._same_group(other)
        if self._box is not None and other._box is not None:
            (o1, s1), (o2, s2) = self._box, other._box
            if len(self) == 0:
                return True
            return all(a >= b and a + s <= b + t for a, s, b, t in zip(o1, s1, o2, s2))
        return bool(np.all(np.isin(self.keys, other.keys, assume_unique=True)))

    def isdisjoint(self, other: "SiteSet") -> bool:
        self._same_group(other)
        return len(np.intersect1d(self.keys, other.keys, assume_unique=True)) == 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, SiteSet) or self.group != other.group:
            return False
        if self._box is not None and other._box is not None:
            if len(self) == 0 or len(other) == 0:
                return len(self) == len(other)
            return self._box == other._box
        return len(self) == len(other) and bool(np.array_equal(self.keys, other.keys))

    def __hash__(self) -> int:
        return hash((self.group, self.keys.tobytes()))

    # translations

    def translate(self, g) -> "SiteSet":
        """Right translate {v g : v in self}."""
        c = np.asarray(self.group.coords_of(g), dtype=np.int64)
        if self._box is not None and self.group.kind == "zd":
            origin = tuple(int(o) + int(x) for o, x in zip(self._box[0], c))
            return SiteSet.box(self.group, self._box[1], origin)
        return SiteSet(self.group, self.group.mul(self.coords, c[None, :]))

    def left_translate(self, g) -> "SiteSet":
        """Left translate {g v : v in self}."""
        c = np.asarray(self.group.coords_of(g), dtype=np.int64)
        if self._box is not None and self.group.kind == "zd":
            return self.translate(g)
        return SiteSet(self.group, self.group.mul(c[None, :], self.coords))

    def inverse(self) -> "SiteSet":
        return SiteSet(self.group, self.group.inv(self.coords))

    def __repr__(self) -> str:
        if self._box is not None:
            return f"SiteSet.box({self.group!r}, shape={self._box[1]}, origin={self._box[0]})"
        return f"SiteSet({self.group!r}, n={len(self)})"


# boundaries and metric quantities


def _radius(r) -> int:
    if not r > 0:
        raise UsageError(f"boundary radius must be positive, got {r!r}")
    return int(math.floor(r))


def r_boundary(sites: SiteSet, r) -> SiteSet:
    """Sites within word distance r of the set's complement boundary, from both sides.

    Returns {x not in L : dist(x, L) <= r} together with {v in L : dist(v, G \\ L) <= r}.
    """
    radius = _radius(r)
    group = sites.group
    keys = sites.keys
    if len(keys) == 0 or radius == 0:
        return SiteSet(group)
    # outer shell, layer by layer
    visited = keys
    frontier = keys
    layers = []
    for _ in range(radius):
        nb = group.neighbor_keys(frontier)
        new = np.setdiff1d(nb, visited, assume_unique=True)
        layers.append(new)
        visited = np.union1d(visited, new)
        frontier = new
    # inner shell: BFS inside the set, seeded by the first outer layer
    inner = []
    seen = np.zeros(0, dtype=np.int64)
    frontier = layers[0]
    for _ in range(radius):
        nb = group.neighbor_keys(frontier)
        nb = np.intersect1d(nb, keys, assume_unique=True)
        new = np.setdiff1d(nb, seen, assume_unique=True)
        if len(new) == 0:
            break
        inner.append(new)
        seen = np.union1d(seen, new)
        frontier = new
    return SiteSet.from_keys(group, np.concatenate(layers + inner))


def _box_boundary_size(shape: Sequence[int], radius: int) -> int:
    """Closed-form |boundary| for a box in Z^d under the 1-norm.

    Inner part: sites whose distance to the outside is at most r, i.e. all
    but the deep core of side max(0, L_i - 2r). Outer part: a site outside
    with exactly the coordinate set S out of range sits at total distance m
    in 2^|S| C(m-1, |S|-1) prod_{i not in S} L_i ways; summing m = 1..r gives
    2^|S| C(r, |S|) prod_{i not in S} L_i.
    """
    shape = [int(s) for s in shape]
    if math.prod(shape) == 0:
        return 0
    inner = math.prod(shape) - math.prod(max(0, s - 2 * radius) for s in shape)
    d = len(shape)
    outer = 0
    for k in range(1, d + 1):
        for subset in itertools.combinations(range(d), k):
            rest = math.prod(shape[i] for i in range(d) if i not in subset)
            outer += (2 ** k) * math.comb(radius, k) * rest
    return inner + outer


def boundary_size(sites: SiteSet, r) -> int:
    """|r_boundary(sites, r)|, in closed form for boxes in Z^d."""
    radius = _radius(r)
    if sites.is_box and sites.group.kind == "zd":
        return _box_boundary_size(sites.box_shape, radius)
    return len(r_boundary(sites, r))


def folner_ratio(sites: SiteSet, r) -> float:
    if len(sites) == 0:
        raise UsageError("Folner ratio of an empty set is undefined")
    return boundary_size(sites, r) / len(sites)


def word_distance(v, w, cutoff: int, group: Group | None = None) -> int | None:
    """Word distance between v and w, or None when it exceeds ``cutoff``."""
    if cutoff < 0:
        raise UsageError("cutoff must be nonnegative")
    if group is None:
        if isinstance(v, GroupElement):
            group = v.group
        elif isinstance(w, GroupElement):
            group = w.group
        else:
            raise UsageError("pass a group when using plain coordinate tuples")
    if isinstance(v, GroupElement) and isinstance(w, GroupElement) and v.group != w.group:
        raise UsageError("elements belong to different groups")
    a = np.asarray(group.coords_of(v))
    b = np.asarray(group.coords_of(w))
    target = group.mul(b, group.inv(a))
    length = int(group.word_lengths(target[None, :], cutoff)[0])
    return None if length < 0 else length


def _difference_keys(group: Group, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Sorted unique keys of {a^-1 b : a in left, b in right}."""
    inv_left = group.inv(left)
    chunk = max(1, 2_000_000 // max(1, len(right)))
    acc = np.zeros(0, dtype=np.int64)
    for start in range(0, len(inv_left), chunk):
        block = group.mul(inv_left[start:start + chunk, None, :], right[None, :, :])
        acc = np.union1d(acc, group.encode(block.reshape(-1, group.dim)))
    return acc


def diameter(sites: SiteSet) -> int:
    """Maximal pairwise word distance."""
    if len(sites) == 0:
        raise UsageError("diameter of an empty set is undefined")
    group = sites.group
    if group.kind == "zd":
        if sites.is_box:
            return sum(s - 1 for s in sites.box_shape)
        c = sites.coords
        best = 0
        # the 1-norm is the maximum of s.x over sign vectors s
        for signs in itertools.product((1, -1), repeat=group.dim - 1):
            s = np.array((1,) + signs, dtype=np.int64)
            proj = c @ s
            best = max(best, int(proj.max() - proj.min()))
        return best
    # |b a^-1| ranges over the same values as |a^-1 b| with the roles of the
    # sides swapped, so use the inverse set to get the right-invariant metric
    inv = group.inv(sites.coords)
    diffs = group.decode(_difference_keys(group, inv, inv))
    lengths = group.word_lengths(diffs, cutoff=10 ** 9)
    return int(lengths.max())


def temperedness_ratio(prefix: Sequence[SiteSet], j: int) -> float:
    """|union_{k<j} Q_k^-1 Q_j| / |Q_j| for a 1-based index j."""
    if not 1 <= j <= len(prefix):
        raise UsageError(f"index j={j} outside 1..{len(prefix)}")
    target = prefix[j - 1]
    if len(target) == 0:
        raise UsageError("Q_j must be nonempty")
    group = target.group
    acc = np.zeros(0, dtype=np.int64)
    for q in prefix[: j - 1]:
        acc = np.union1d(acc, _difference_keys(group, q.coords, target.coords))
    return len(acc) / len(target)


def word_ball(group: Group, radius: int) -> SiteSet:
    """Closed ball of the word metric around the identity."""
    if radius < 0:
        raise UsageError("radius must be nonnegative")
    if group.kind == "zd":
        d = group.dim
        rng = np.arange(-radius, radius + 1)
        grid = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1).reshape(-1, d)
        return SiteSet(group, grid[np.abs(grid).sum(axis=1) <= radius])
    keys, _ = group._ball_layers(radius)
    return SiteSet.from_keys(group, keys, assume_unique=True)


FAMILIES = ("cubes", "balls", "heisenberg-boxes")


@dataclass(frozen=True)
class FolnerSpec:
    """A named Folner family evaluated at a list of indices.

    cubes: [0, L)^d in Z^d; balls: word-metric balls of radius L;
    heisenberg-boxes: [0, n) x [0, n) x [0, n^2).
    """

    group: Group
    family: str
    indices: tuple
    nested: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown Folner family {self.family!r}")
        if self.family == "heisenberg-boxes" and self.group.kind != "heisenberg":
            raise UsageError("heisenberg-boxes need the Heisenberg group")
        if self.family == "cubes" and self.group.kind != "zd":
            raise UsageError("cubes are defined for Z^d")
        idx = tuple(int(i) for i in self.indices)
        if not idx or min(idx) < 0:
            raise UsageError("indices must be a nonempty list of nonnegative integers")
        object.__setattr__(self, "indices", idx)

    def member(self, index: int) -> SiteSet:
        if self.family == "cubes":
            return SiteSet.cube(self.group, index)
        if self.family == "heisenberg-boxes":
            return SiteSet.box(self.group, (index, index, index * index))
        return word_ball(self.group, index)

    def sets(self) -> list[SiteSet]:
        members = [self.member(i) for i in self.indices]
        if not self.nested:
            return members
        out: list[SiteSet] = []
        for m in members:
            if len(m) == 0:
                continue
            if self.group.identity not in m:
                m = m.translate(self.group.inv(np.asarray(m.min_element())))
            if out and (len(m) <= len(out[-1]) or not out[-1].issubset(m)):
                continue
            out.append(m)
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "FolnerSpec":
        group = group_from_config(cfg)
        return cls(group, cfg["family"], tuple(cfg["indices"]), bool(cfg.get("nested", True)))

    def to_config(self) -> dict:
        cfg = self.group.to_config()
        cfg.update(family=self.family, indices=list(self.indices), nested=self.nested)
        return cfg


def group_from_config(cfg: dict) -> Group:
    kind = cfg.get("group", cfg.get("kind"))
    if kind == "zd":
        return Group.zd(int(cfg.get("d", 1)))
    if kind == "heisenberg":
        return Group.heisenberg()
    raise UsageError(f"unknown group {kind!r}")
