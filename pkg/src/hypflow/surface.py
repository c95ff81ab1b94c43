"""Closed triangulated marked surfaces with piecewise hyperbolic metrics.

Combinatorics (edges, adjacency, Euler characteristic), the Delaunay edge
predicate, edge flips with hyperbolic diagonal-length propagation and full
Delaunay re-triangulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .triangle import (
    TriLengths,
    admissible_mask,
    angles_from_length_array,
    scaled_length,
    tri_angles,
)

__all__ = [
    "SurfaceError",
    "AdmissibilityError",
    "FlipError",
    "MarkedSurface",
    "PHMetric",
    "FlipEvent",
    "ValidationReport",
    "validate_combinatorics",
    "validate",
    "euler_characteristic",
    "apply_conformal",
    "face_corner_lengths",
    "face_angles",
    "delaunay_weights",
    "delaunay_weight",
    "diagonal_length",
    "flip_edge",
    "advance_conformal",
    "make_delaunay",
    "clone_state",
    "TOL_DELAUNAY",
]

# weights in [-TOL_DELAUNAY, 0) count as Delaunay, avoiding flip thrashing at
# co-circular configurations (the Delaunay condition itself is non-strict)
TOL_DELAUNAY = 1e-12


class SurfaceError(RuntimeError):
    pass


class AdmissibilityError(SurfaceError):
    """A face violates the strict triangle inequalities."""


class FlipError(SurfaceError):
    """A requested edge flip is refused; the state is left unmodified."""


Edge = tuple


def _edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


def validate_combinatorics(vertex_count: int, faces) -> list:
    """Diagnostics for raw face lists; empty list means valid closed surface."""
    errors = []
    directed = {}
    undirected = {}
    for fi, f in enumerate(faces):
        if len(f) != 3:
            errors.append(f"face {fi} does not have 3 vertices: {tuple(f)}")
            continue
        a, b, c = f
        if len({a, b, c}) != 3:
            errors.append(f"face {fi} repeats a vertex: {tuple(f)}")
            continue
        for v in f:
            if not (0 <= v < vertex_count):
                errors.append(f"face {fi} references vertex {v} out of range")
        for s, t in ((a, b), (b, c), (c, a)):
            if (s, t) in directed:
                errors.append(
                    f"directed edge ({s},{t}) repeated (faces {directed[(s, t)]}, {fi}):"
                    " inconsistent orientation or non-manifold edge"
                )
            directed[(s, t)] = fi
            undirected.setdefault(_edge(s, t), []).append(fi)
    for e, fs in undirected.items():
        if len(fs) == 1:
            errors.append(f"boundary edge {e} (only face {fs[0]})")
        elif len(fs) > 2:
            errors.append(f"non-manifold edge {e} shared by faces {fs}")
    return errors


class MarkedSurface:
    """Closed oriented triangulated surface over vertices 0..N-1.

    Faces are oriented vertex triples.  Derived adjacency arrays are rebuilt
    after each mutation; vertex indices are stable across flips.
    """

    def __init__(self, vertex_count: int, faces):
        self.vertex_count = int(vertex_count)
        self.faces = [tuple(int(v) for v in f) for f in faces]
        self._refresh()

    def _refresh(self):
        errors = validate_combinatorics(self.vertex_count, self.faces)
        if errors:
            raise SurfaceError("; ".join(errors))
        incid = {}
        for fi, (a, b, c) in enumerate(self.faces):
            incid.setdefault(_edge(b, c), []).append((fi, 0))
            incid.setdefault(_edge(a, c), []).append((fi, 1))
            incid.setdefault(_edge(a, b), []).append((fi, 2))
        self.edges = sorted(incid)
        self.edge_index = {e: idx for idx, e in enumerate(self.edges)}
        self.face_array = np.array(self.faces, dtype=np.int64)
        ne, nf = len(self.edges), len(self.faces)
        self.edge_faces = [incid[e] for e in self.edges]
        # FE[f, c] = index of the edge opposite corner c of face f
        self.FE = np.empty((nf, 3), dtype=np.int64)
        for idx, pairs in enumerate(self.edge_faces):
            for fi, c in pairs:
                self.FE[fi, c] = idx
        ef = np.array(
            [[pairs[0][0], pairs[0][1], pairs[1][0], pairs[1][1]] for pairs in self.edge_faces],
            dtype=np.int64,
        )
        self._ef_f1, self._ef_c1 = ef[:, 0], ef[:, 1]
        self._ef_f2, self._ef_c2 = ef[:, 2], ef[:, 3]
        earr = np.array(self.edges, dtype=np.int64).reshape(ne, 2)
        self._edge_i, self._edge_j = earr[:, 0], earr[:, 1]

    def edge_endpoints(self):
        return self._edge_i, self._edge_j

    def degree(self, v: int) -> int:
        return int(np.count_nonzero((self._edge_i == v) | (self._edge_j == v)))


class PHMetric:
    """Edge lengths of the current triangulation plus epoch data for scaling.

    ``base_length``/``epoch_u`` snapshot the state at the start of the current
    triangulation epoch: current lengths are the vertex scaling of the base
    lengths by ``current_u - epoch_u``.  Each flip starts a new epoch, which
    reproduces restarting the flow with the post-surgery metric as initial
    data while keeping cumulative conformal factors (u(0) = 0) well defined.
    """

    def __init__(self, surf: MarkedSurface, length: dict):
        missing = [e for e in surf.edges if e not in length]
        if missing:
            raise SurfaceError(f"missing edge lengths: {missing[:5]}")
        self.length = {e: float(length[e]) for e in surf.edges}
        for e, l in self.length.items():
            if not (l > 0.0 and math.isfinite(l)):
                raise SurfaceError(f"edge {e} has non-positive length {l}")
        self.base_length = dict(self.length)
        self.epoch_u = np.zeros(surf.vertex_count)
        self.current_u = np.zeros(surf.vertex_count)

    def copy(self) -> "PHMetric":
        m = object.__new__(PHMetric)
        m.length = dict(self.length)
        m.base_length = dict(self.base_length)
        m.epoch_u = self.epoch_u.copy()
        m.current_u = self.current_u.copy()
        return m

    def length_array(self, surf: MarkedSurface) -> np.ndarray:
        return np.array([self.length[e] for e in surf.edges])


@dataclass
class FlipEvent:
    old_edge: Edge
    new_edge: Edge
    time: float
    pre_weight: float


@dataclass
class ValidationReport:
    ok: bool
    chi: int
    n_vertices: int
    n_edges: int
    n_faces: int
    min_slack: float
    errors: list = field(default_factory=list)


def euler_characteristic(surf: MarkedSurface) -> int:
    return surf.vertex_count - len(surf.edges) + len(surf.faces)


def clone_state(surf: MarkedSurface, m: PHMetric):
    """Independent copy of a surface/metric pair.

    Surfaces and metrics mutate together under flips, so they must be cloned
    together; a metric copy alone would go stale after surgery.
    """
    surf2 = MarkedSurface(surf.vertex_count, surf.faces)
    m2 = m.copy()
    return surf2, m2


def face_corner_lengths(surf: MarkedSurface, m: PHMetric) -> np.ndarray:
    """(F, 3) lengths; entry [f, c] is the length of the edge opposite corner c."""
    return m.length_array(surf)[surf.FE]


def face_angles(surf: MarkedSurface, m: PHMetric, strict: bool = True) -> np.ndarray:
    """(F, 3) inner angles at each corner of each face.

    With ``strict`` the first inadmissible face raises AdmissibilityError;
    otherwise inadmissible rows get the constant extension (pi opposite the
    longest edge, ties broken by smallest opposite vertex index).
    """
    L = face_corner_lengths(surf, m)
    ok = admissible_mask(L)
    angles = angles_from_length_array(L)
    if bool(ok.all()):
        return angles
    if strict:
        bad = int(np.flatnonzero(~ok)[0])
        raise AdmissibilityError(
            f"face {bad} {surf.faces[bad]} is inadmissible with opposite lengths {L[bad]}"
        )
    for fi in np.flatnonzero(~ok):
        row = L[fi]
        verts = surf.faces[fi]
        big = max(range(3), key=lambda c: (row[c], -verts[c]))
        angles[fi] = 0.0
        angles[fi, big] = math.pi
    return angles


def validate(surf: MarkedSurface, m: PHMetric) -> ValidationReport:
    """Closed-manifold, orientation and admissibility report for a state."""
    errors = validate_combinatorics(surf.vertex_count, surf.faces)
    chi = euler_characteristic(surf)
    if chi % 2 != 0 or chi > 2:
        errors.append(f"Euler characteristic {chi} is not an even integer <= 2")
    L = face_corner_lengths(surf, m)
    slack = L.sum(axis=1) - 2.0 * L.max(axis=1)
    for fi in np.flatnonzero(slack <= 0.0):
        errors.append(f"inadmissible face {int(fi)} {surf.faces[int(fi)]}")
    return ValidationReport(
        ok=not errors,
        chi=chi,
        n_vertices=surf.vertex_count,
        n_edges=len(surf.edges),
        n_faces=len(surf.faces),
        min_slack=float(slack.min()),
        errors=errors,
    )


def apply_conformal(surf: MarkedSurface, m: PHMetric, u: np.ndarray) -> None:
    """Set current lengths to the vertex scaling of the epoch base by u."""
    u = np.asarray(u, dtype=float)
    if u.shape != (surf.vertex_count,):
        raise ValueError(f"u has shape {u.shape}, expected ({surf.vertex_count},)")
    if not np.all(np.isfinite(u)):
        raise ValueError("conformal factors must be finite")
    du = u - m.epoch_u
    i_idx, j_idx = surf.edge_endpoints()
    s = du[i_idx] + du[j_idx]
    base = np.array([m.base_length[e] for e in surf.edges])
    half = np.sinh(0.5 * base)
    if np.any(np.log(half) + s > 350.0):
        raise OverflowError("conformal factor out of representable range")
    new = 2.0 * np.arcsinh(half * np.exp(s))
    m.length = dict(zip(surf.edges, new.tolist()))
    m.current_u = u.copy()


def delaunay_weights(surf: MarkedSurface, m: PHMetric, angles: np.ndarray | None = None) -> np.ndarray:
    """Per-edge Delaunay weights: four near angles minus the two opposite ones.

    An edge satisfies the Delaunay condition iff its weight is >= 0.
    """
    if angles is None:
        angles = face_angles(surf, m)
    asum = angles.sum(axis=1)
    a1 = angles[surf._ef_f1, surf._ef_c1]
    a2 = angles[surf._ef_f2, surf._ef_c2]
    return asum[surf._ef_f1] - 2.0 * a1 + asum[surf._ef_f2] - 2.0 * a2


def delaunay_weight(surf: MarkedSurface, m: PHMetric, e: Edge) -> float:
    return float(delaunay_weights(surf, m)[surf.edge_index[_edge(*e)]])


def _quad_around(surf: MarkedSurface, e: Edge):
    """Return (i, j, k, l, face_ij, face_ji) for the quad around edge e.

    face_ij contains the directed edge (i, j) with opposite vertex k;
    face_ji contains (j, i) with opposite vertex l.
    """
    i, j = _edge(*e)
    (f1, c1), (f2, c2) = surf.edge_faces[surf.edge_index[(i, j)]]
    if f1 == f2:
        raise FlipError(f"edge {e} bounds a single face twice")

    def directed(fi, c):
        f = surf.faces[fi]
        a, b = f[(c + 1) % 3], f[(c + 2) % 3]
        return (a, b), f[c]

    (a1, b1), k1 = directed(f1, c1)
    (a2, b2), k2 = directed(f2, c2)
    if (a1, b1) == (i, j):
        return i, j, k1, k2, f1, f2
    return i, j, k2, k1, f2, f1


def _tri_lengths_for(m: PHMetric, va: int, vb: int, vc: int) -> TriLengths:
    """TriLengths for triangle (va, vb, vc) read off the current metric."""
    return TriLengths(
        l_ij=m.length[_edge(va, vb)],
        l_ik=m.length[_edge(va, vc)],
        l_jk=m.length[_edge(vb, vc)],
    )


def _diagonal_both(surf: MarkedSurface, m: PHMetric, e: Edge):
    """New diagonal length computed independently from both ends of e."""
    i, j, k, l, _, _ = _quad_around(surf, e)
    ang1 = tri_angles(_tri_lengths_for(m, i, j, k))  # (i, j, k): a_i at vertex i
    ang2 = tri_angles(_tri_lengths_for(m, i, j, l))

    def from_side(theta, d_a, d_b):
        x = math.cosh(d_a) * math.cosh(d_b) - math.sinh(d_a) * math.sinh(d_b) * math.cos(theta)
        if x <= 1.0:
            raise FlipError(f"flip of edge {e} produces degenerate triangle")
        return math.acosh(x)

    d_ik, d_il = m.length[_edge(i, k)], m.length[_edge(i, l)]
    d_jk, d_jl = m.length[_edge(j, k)], m.length[_edge(j, l)]
    from_i = from_side(ang1.a_i + ang2.a_i, d_ik, d_il)
    from_j = from_side(ang1.a_j + ang2.a_j, d_jk, d_jl)
    return from_i, from_j, (i, j, k, l)


def diagonal_length(surf: MarkedSurface, m: PHMetric, e: Edge) -> float:
    """Length of the quad diagonal {k, l} that a flip of e would insert."""
    from_i, from_j, _ = _diagonal_both(surf, m, e)
    if abs(from_i - from_j) > 1e-8 * max(1.0, from_i):
        raise SurfaceError(
            f"two-sided diagonal computations disagree at edge {e}: {from_i} vs {from_j}"
        )
    return from_i


def flip_edge(surf: MarkedSurface, m: PHMetric, e: Edge, time: float = 0.0) -> FlipEvent:
    """Replace the two faces at e by the two faces of the other diagonal.

    The flip is an isometry of the piecewise hyperbolic metric: the new
    diagonal length is computed inside the glued quadrilateral and a new
    scaling epoch starts.  Refused (no mutation) if the result would be a
    multi-edge or a degenerate triangle.
    """
    e = _edge(*e)
    if e not in surf.edge_index:
        raise FlipError(f"no such edge {e}")
    pre_weight = delaunay_weight(surf, m, e)
    from_i, from_j, (i, j, k, l) = _diagonal_both(surf, m, e)
    if k == l:
        raise FlipError(f"flip of edge {e} would create a self-loop at vertex {k}")
    if _edge(k, l) in surf.edge_index:
        raise FlipError(f"flip of edge {e} would create a multi-edge {_edge(k, l)}")
    d_kl = from_i
    new1 = (m.length[_edge(i, k)], m.length[_edge(i, l)], d_kl)
    new2 = (m.length[_edge(j, k)], m.length[_edge(j, l)], d_kl)
    for tri in (new1, new2):
        if sum(tri) - 2.0 * max(tri) <= 0.0:
            raise FlipError(f"flip of edge {e} produces degenerate triangle")

    fa, fb = surf.edge_faces[surf.edge_index[e]]
    keep = [f for fi, f in enumerate(surf.faces) if fi not in (fa[0], fb[0])]
    keep.append((k, i, l))
    keep.append((l, j, k))
    surf.faces = keep
    del m.length[e]
    m.length[_edge(k, l)] = d_kl
    surf._refresh()
    # new epoch: base lengths are the post-flip lengths at the current u
    m.base_length = dict(m.length)
    m.epoch_u = m.current_u.copy()
    return FlipEvent(old_edge=e, new_edge=_edge(k, l), time=time, pre_weight=pre_weight)


def advance_conformal(
    surf: MarkedSurface,
    m: PHMetric,
    u: np.ndarray,
    tol: float = TOL_DELAUNAY,
    time: float = 0.0,
    max_flips: int | None = None,
    wall_weight_cap: float = 1e-8,
):
    """Move the state to conformal factors ``u`` along a straight segment,
    flipping exactly at the walls where a Delaunay weight vanishes.

    Vertex scaling and geometric flips commute only at co-circular
    configurations, so flipping at the walls (found by bisection) makes the
    final metric a function of ``u`` alone, independent of the path taken.
    Flipping after overshooting a wall would instead leave a residue of the
    path in the lengths.

    Returns ``(events, max_jump)`` where ``max_jump`` is the largest sup-norm
    change of the curvature across any single flip (a rounding-level
    isometry-continuity diagnostic).

    Raises AdmissibilityError if the segment leaves the admissible cone away
    from any wall (the obstruction is then a degenerating face, not a flip).
    """
    u = np.asarray(u, dtype=float)
    cap = max_flips if max_flips is not None else 100 * len(surf.edges)
    events: list = []
    max_jump = 0.0

    def K_of():
        ang = face_angles(surf, m, strict=True)
        K = np.full(surf.vertex_count, 2.0 * math.pi)
        np.add.at(K, surf.face_array.ravel(), -ang.ravel())
        return K

    def flip_with_jump(e):
        K_pre = K_of()
        ev = flip_edge(surf, m, e, time=time)
        K_post = K_of()
        return ev, float(np.max(np.abs(K_post - K_pre)))

    # normalize the starting state: flips here happen at whatever weights the
    # given initial data has (initial normalization, not a scaling path)
    apply_conformal(surf, m, m.current_u)
    pending = delaunay_weights(surf, m)
    while pending.min() < -tol:
        if len(events) >= cap:
            raise SurfaceError(f"advance_conformal exceeded {cap} flips")
        order = np.argsort(pending, kind="stable")
        flipped = False
        for idx in order:
            if pending[idx] >= -tol:
                break
            try:
                ev, jump = flip_with_jump(surf.edges[idx])
            except FlipError:
                continue
            events.append(ev)
            max_jump = max(max_jump, jump)
            flipped = True
            break
        if not flipped:
            raise SurfaceError(
                f"no non-Delaunay edge is flippable; min weight {pending.min():.3e}"
            )
        pending = delaunay_weights(surf, m)

    while True:
        if len(events) > cap:
            raise SurfaceError(f"advance_conformal exceeded {cap} flips")
        u_from = m.current_u.copy()

        def weights_at(s):
            apply_conformal(surf, m, u_from + s * (u - u_from))
            return delaunay_weights(surf, m)

        def bad(s):
            try:
                return bool(weights_at(s).min() < -tol)
            except (AdmissibilityError, OverflowError):
                return True

        if not bad(1.0):
            return events, max_jump
        lo, hi = 0.0, 1.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if bad(mid):
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-15:
                break
        w_lo = weights_at(lo)
        idx = int(np.argmin(w_lo))
        if w_lo[idx] > wall_weight_cap:
            # the obstruction along the segment is a degenerating face, not a
            # Delaunay wall; report it so callers can shorten the move
            raise AdmissibilityError(
                "conformal segment leaves the admissible cone away from any "
                f"Delaunay wall (s in ({lo:.6g}, {hi:.6g}])"
            )
        ev, jump = flip_with_jump(surf.edges[idx])
        events.append(ev)
        max_jump = max(max_jump, jump)


def make_delaunay(
    surf: MarkedSurface,
    m: PHMetric,
    tol: float = TOL_DELAUNAY,
    time: float = 0.0,
    max_flips: int | None = None,
) -> list:
    """Flip non-Delaunay edges (most negative weight first) until none remain."""
    cap = max_flips if max_flips is not None else 100 * len(surf.edges)
    events = []
    while True:
        w = delaunay_weights(surf, m)
        order = np.argsort(w, kind="stable")
        candidates = [idx for idx in order if w[idx] < -tol]
        if not candidates:
            return events
        if len(events) >= cap:
            raise SurfaceError(
                f"make_delaunay exceeded {cap} flips; "
                f"remaining min weight {w.min():.3e}, lengths={m.length}"
            )
        flipped = False
        for idx in candidates:
            try:
                events.append(flip_edge(surf, m, surf.edges[idx], time=time))
                flipped = True
                break
            except FlipError:
                continue
        if not flipped:
            raise SurfaceError(
                "no non-Delaunay edge is flippable; "
                f"min weight {w.min():.3e}, lengths={m.length}"
            )
