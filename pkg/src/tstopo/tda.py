"""Persistent homology of time series point clouds.

Pipeline: delay embedding -> Euclidean distance matrix -> Vietoris-Rips
filtration (dimension <= 2) -> H0/H1 persistence pairs -> fixed-capacity
point set via (a, b) -> (a, b, b - a).

Two routes compute pairs: `reduce_boundary` is the standard Z/2 column
reduction over the full filtration, and `_fast_pairs` splits the work into
a union-find sweep for H0 plus a triangle-against-edge reduction for H1.
Both produce the same birth/death multisets; the fast route is what the
instance pipeline uses.  `betti_at`/`persistent_betti` provide an
independent rank-based oracle for tests.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


class SeriesTooShortError(ValueError):
    """Raised when a series cannot host the requested delay embedding."""


class MalformedFiltrationError(ValueError):
    """Raised when a simplex's face is missing from the filtration."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # [n, m]
    m: int
    gamma: int

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != self.m:
            raise ValueError("point cloud must be [n, m]")


@dataclass(frozen=True)
class Simplex:
    verts: tuple  # sorted vertex indices
    dim: int
    eps: float


@dataclass(frozen=True)
class Filtration:
    simplices: list  # Simplex, sorted by (eps, dim, verts)
    max_eps: float
    max_dim: int = 2


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float  # math.inf marks an essential class
    channel: int = 0

    @property
    def essential(self) -> bool:
        return math.isinf(self.death)

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass
class PersistenceDiagram:
    pairs: list = field(default_factory=list)  # list[PersistencePair]

    def filtered(self, dims=(0, 1)) -> "PersistenceDiagram":
        return PersistenceDiagram([p for p in self.pairs if p.dim in dims])


@dataclass(frozen=True)
class TopoPointSet:
    rows: np.ndarray   # [M, 3], rows (a, b, b - a); masked rows all-zero
    mask: np.ndarray   # [M] bool, True = real feature
    dims: np.ndarray   # [M] int, homology dimension of each unmasked row

    @property
    def capacity(self) -> int:
        return self.rows.shape[0]


# ---------------------------------------------------------------------------
# embedding and distances
# ---------------------------------------------------------------------------

def delay_embed(channel: np.ndarray, m: int, gamma: int) -> PointCloud:
    """Takens delay embedding of a scalar series.

    Point k is (x_k, x_{k+gamma}, ..., x_{k+(m-1)gamma}); there are
    T - (m-1)*gamma of them.
    """
    channel = np.asarray(channel, dtype=np.float64).reshape(-1)
    t = channel.shape[0]
    if m < 1 or gamma < 1:
        raise ValueError("m and gamma must be >= 1")
    n = t - (m - 1) * gamma
    if n < 1:
        raise SeriesTooShortError(
            f"series length {t} too short for m={m}, gamma={gamma}")
    points = np.empty((n, m))
    for j in range(m):
        points[:, j] = channel[j * gamma: j * gamma + n]
    return PointCloud(points=points, m=m, gamma=gamma)


def pairwise_distances(cloud) -> np.ndarray:
    """Symmetric Euclidean distance matrix with a zero diagonal."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("empty point cloud")
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff * diff).sum(-1))
    np.fill_diagonal(d, 0.0)
    return d


_TRIANGLE_CACHE: dict = {}


def _triangle_indices(n: int) -> np.ndarray:
    tri = _TRIANGLE_CACHE.get(n)
    if tri is None:
        tri = np.array(list(itertools.combinations(range(n), 3)), dtype=np.int64)
        tri = tri.reshape(-1, 3)
        _TRIANGLE_CACHE[n] = tri
    return tri


def _sorted_edges(d: np.ndarray, max_eps: float):
    n = d.shape[0]
    iu, ju = np.triu_indices(n, 1)
    w = d[iu, ju]
    keep = w <= max_eps
    ei, ej, ew = iu[keep], ju[keep], w[keep]
    order = np.lexsort((ej, ei, ew))
    return ei[order], ej[order], ew[order]


def _sorted_triangles(d: np.ndarray, max_eps: float):
    n = d.shape[0]
    tri = _triangle_indices(n)
    if len(tri) == 0:
        return tri, np.empty(0)
    w = np.maximum(np.maximum(d[tri[:, 0], tri[:, 1]], d[tri[:, 0], tri[:, 2]]),
                   d[tri[:, 1], tri[:, 2]])
    keep = w <= max_eps
    tri, w = tri[keep], w[keep]
    order = np.lexsort((tri[:, 2], tri[:, 1], tri[:, 0], w))
    return tri[order], w[order]


def build_rips_filtration(d: np.ndarray, max_eps: float) -> Filtration:
    """Vietoris-Rips filtration up to dimension 2.

    A simplex enters at the maximum pairwise distance among its vertices;
    ties are broken by dimension then lexicographic vertex order.
    """
    d = np.asarray(d, dtype=np.float64)
    if max_eps < 0:
        raise ValueError("max_eps must be >= 0")
    n = d.shape[0]
    simplices = [Simplex((i,), 0, 0.0) for i in range(n)]
    ei, ej, ew = _sorted_edges(d, max_eps)
    simplices += [Simplex((int(a), int(b)), 1, float(w))
                  for a, b, w in zip(ei, ej, ew)]
    tri, tw = _sorted_triangles(d, max_eps)
    simplices += [Simplex((int(a), int(b), int(c)), 2, float(w))
                  for (a, b, c), w in zip(tri, tw)]
    simplices.sort(key=lambda s: (s.eps, s.dim, s.verts))
    return Filtration(simplices=simplices, max_eps=float(max_eps))


# ---------------------------------------------------------------------------
# standard boundary-matrix reduction
# ---------------------------------------------------------------------------

def reduce_boundary(f: Filtration) -> list:
    """Standard Z/2 column reduction of the boundary matrix.

    Returns PersistencePairs in filtration order.  Zero-persistence pairs
    (birth == death) are retained; unpaired simplices of dimension 0 or 1
    become essential pairs (death = inf).
    """
    simplices = f.simplices
    index = {s.verts: i for i, s in enumerate(simplices)}
    pivot_owner: dict = {}
    pivot_col: dict = {}
    pairs = []
    unpaired: set = set()
    for j, s in enumerate(simplices):
        col = 0
        if s.dim > 0:
            for face in itertools.combinations(s.verts, s.dim):
                row = index.get(face)
                if row is None:
                    raise MalformedFiltrationError(
                        f"face {face} of simplex {s.verts} missing")
                col |= 1 << row
        while col:
            low = col.bit_length() - 1
            if low not in pivot_col:
                pivot_col[low] = col
                pivot_owner[low] = j
                birth_s = simplices[low]
                pairs.append(PersistencePair(dim=birth_s.dim, birth=birth_s.eps,
                                             death=s.eps))
                unpaired.discard(low)
                break
            col ^= pivot_col[low]
        else:
            unpaired.add(j)
    for j in sorted(unpaired):
        s = simplices[j]
        if s.dim <= 1:
            pairs.append(PersistencePair(dim=s.dim, birth=s.eps, death=math.inf))
    return pairs


# ---------------------------------------------------------------------------
# rank-based Betti oracle (small instances only)
# ---------------------------------------------------------------------------

def _gf2_rank(mat: np.ndarray) -> int:
    m = (np.asarray(mat) % 2).astype(np.uint8).copy()
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = None
        for r in range(rank, rows):
            if m[r, c]:
                piv = r
                break
        if piv is None:
            continue
        m[[rank, piv]] = m[[piv, rank]]
        hit = m[:, c].astype(bool).copy()
        hit[rank] = False
        m[hit] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _complex_at(d: np.ndarray, eps: float):
    """Vertices, edges and triangles of VR(X, eps) in index order."""
    n = d.shape[0]
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if d[i, j] <= eps]
    tris = [(i, j, k) for i in range(n) for j in range(i + 1, n)
            for k in range(j + 1, n)
            if max(d[i, j], d[i, k], d[j, k]) <= eps]
    return n, edges, tris


def _boundary_matrices(n, edges, tris):
    e_idx = {e: i for i, e in enumerate(edges)}
    d1 = np.zeros((n, len(edges)), dtype=np.uint8)
    for c, (a, b) in enumerate(edges):
        d1[a, c] = 1
        d1[b, c] = 1
    d2 = np.zeros((len(edges), len(tris)), dtype=np.uint8)
    for c, (a, b, cc) in enumerate(tris):
        for face in ((a, b), (a, cc), (b, cc)):
            d2[e_idx[face], c] = 1
    return d1, d2


def betti_at(d: np.ndarray, eps: float, p: int) -> int:
    """Betti number of VR(X, eps) via explicit Z/2 rank computation."""
    return persistent_betti(d, eps, eps, p)


def persistent_betti(d: np.ndarray, eps_b: float, eps_d: float, p: int) -> int:
    """Rank of the map H_p(VR(eps_b)) -> H_p(VR(eps_d)), eps_b <= eps_d.

    Computed as dim Z_p(K_i) - dim(B_p(K_j) within C_p(K_i)) from Z/2 ranks.
    """
    if eps_d < eps_b:
        raise ValueError("eps_d must be >= eps_b")
    if p not in (0, 1):
        raise ValueError("only p in {0, 1} supported")
    d = np.asarray(d, dtype=np.float64)
    n, edges_i, tris_i = _complex_at(d, eps_b)
    _, edges_j, tris_j = _complex_at(d, eps_d)
    d1_i, d2_i = _boundary_matrices(n, edges_i, tris_i)
    if p == 0:
        z_dim = n  # every vertex chain is a cycle
        # boundaries in K_j all live on vertices, which are all present in K_i
        d1_j, _ = _boundary_matrices(n, edges_j, tris_j)
        inter = _gf2_rank(d1_j) if edges_j else 0
        return z_dim - inter
    # p == 1
    z_dim = len(edges_i) - (_gf2_rank(d1_i) if edges_i else 0)
    if not tris_j:
        return z_dim
    _, d2_j = _boundary_matrices(n, edges_j, tris_j)
    in_i = {e for e in edges_i}
    outside = [r for r, e in enumerate(edges_j) if e not in in_i]
    rank_full = _gf2_rank(d2_j)
    rank_outside = _gf2_rank(d2_j[outside]) if outside else 0
    inter = rank_full - rank_outside
    return z_dim - inter


# ---------------------------------------------------------------------------
# fast instance pipeline
# ---------------------------------------------------------------------------

def _fast_pairs(d: np.ndarray, max_eps: float):
    """H0 via union-find over sorted edges, H1 via triangle-edge reduction.

    Returns (h0_deaths, n_components, h1_pairs, essential_h1_births).
    Equivalent to `reduce_boundary` on the same filtration: edge columns of
    the full reduction only ever pivot on vertex rows and triangle columns
    only on edge rows, so the two dimensions reduce independently.
    """
    n = d.shape[0]
    ei, ej, ew = _sorted_edges(d, max_eps)
    n_edges = len(ew)

    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    h0_deaths = []
    for idx in range(n_edges):
        ra, rb = find(int(ei[idx])), find(int(ej[idx]))
        if ra != rb:
            parent[ra] = rb
            h0_deaths.append(float(ew[idx]))
    n_components = n - len(h0_deaths)

    tri, tw = _sorted_triangles(d, max_eps)
    h1_pairs = []
    paired_edges: set = set()
    if len(tri):
        eid = np.full((n, n), -1, dtype=np.int64)
        arange = np.arange(n_edges)
        eid[ei, ej] = arange
        eid[ej, ei] = arange
        e1 = eid[tri[:, 0], tri[:, 1]]
        e2 = eid[tri[:, 0], tri[:, 2]]
        e3 = eid[tri[:, 1], tri[:, 2]]
        pivot_col: dict = {}
        for t in range(len(tw)):
            col = (1 << int(e1[t])) | (1 << int(e2[t])) | (1 << int(e3[t]))
            while col:
                low = col.bit_length() - 1
                c = pivot_col.get(low)
                if c is None:
                    pivot_col[low] = col
                    h1_pairs.append((float(ew[low]), float(tw[t])))
                    paired_edges.add(low)
                    break
                col ^= c

    # creator edges (close a cycle) never killed by a triangle are essential
    essential_h1 = []
    parent = list(range(n))
    for idx in range(n_edges):
        ra, rb = find(int(ei[idx])), find(int(ej[idx]))
        if ra == rb:
            if idx not in paired_edges:
                essential_h1.append(float(ew[idx]))
        else:
            parent[ra] = rb
    return h0_deaths, n_components, h1_pairs, essential_h1


def enclosing_radius(d: np.ndarray) -> float:
    """min over vertices of the max distance to any other vertex.

    At this scale the Rips complex is a cone, so every H1 class has died
    and later H1 births have zero persistence; capping the filtration here
    leaves the positive-persistence diagram unchanged.
    """
    if d.shape[0] == 1:
        return 0.0
    return float(d.max(axis=1).min())


def default_gamma(t: int) -> int:
    return max(t // 16, 1)


def subsample_series(values: np.ndarray, max_len: int = 512) -> np.ndarray:
    """Evenly spaced subsample for very long series (VR cost is cubic)."""
    t = values.shape[0]
    if t <= max_len:
        return values
    idx = np.linspace(0, t - 1, max_len).round().astype(int)
    return values[idx]


def diagram_for_instance(values: np.ndarray, m: int = 2,
                         gamma: int | None = None,
                         max_eps: float | None = None) -> PersistenceDiagram:
    """Composite H0/H1 diagram of a [T, C] series.

    Channels are embedded and reduced independently and their diagrams
    unioned.  Zero-persistence pairs are dropped; essential classes get
    death = the channel cloud's max pairwise distance so the delta-map
    stays finite.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    values = subsample_series(values)
    t = values.shape[0]
    g = gamma if gamma is not None else default_gamma(t)
    pairs = []
    for c in range(values.shape[1]):
        cloud = delay_embed(values[:, c], m, g)
        d = pairwise_distances(cloud)
        max_dist = float(d.max())
        cap = max_eps if max_eps is not None else enclosing_radius(d)
        h0_deaths, n_comp, h1, ess_h1 = _fast_pairs(d, cap)
        for death in h0_deaths:
            if death > 0.0:
                pairs.append(PersistencePair(0, 0.0, death, channel=c))
        if max_dist > 0.0:
            pairs.extend(PersistencePair(0, 0.0, max_dist, channel=c)
                         for _ in range(n_comp))
        for birth, death in h1:
            if death > birth:
                pairs.append(PersistencePair(1, birth, death, channel=c))
        for birth in ess_h1:
            if max_dist > birth:
                pairs.append(PersistencePair(1, birth, max_dist, channel=c))
    return PersistenceDiagram(pairs=pairs)


def diagram_to_point_set(dgm: PersistenceDiagram, capacity: int) -> TopoPointSet:
    """Map pairs through (a, b) -> (a, b, b - a) into a fixed-size set.

    Overflow keeps the `capacity` pairs with largest persistence; ties break
    toward smaller birth, then H0 before H1.  Unused rows are zeroed and
    masked out.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    ranked = sorted(dgm.pairs, key=lambda p: (-(p.death - p.birth), p.birth, p.dim))
    ranked = ranked[:capacity]
    rows = np.zeros((capacity, 3))
    mask = np.zeros(capacity, dtype=bool)
    dims = np.zeros(capacity, dtype=np.int64)
    for i, p in enumerate(ranked):
        rows[i] = (p.birth, p.death, p.death - p.birth)
        mask[i] = True
        dims[i] = p.dim
    return TopoPointSet(rows=rows, mask=mask, dims=dims)
