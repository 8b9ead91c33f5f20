"""Constrained Delaunay triangulation with quality/size refinement.

Incremental Bowyer-Watson construction inside a super-triangle, segment
recovery by cavity re-triangulation, and Ruppert-style refinement: encroached
subsegments split at their (curve-snapped) midpoints, skinny or oversized
triangles split at circumcenters, circumcenters that would cross a boundary
replaced by a split of the occluding subsegment.

The full triangulation (exterior and hole regions included) is kept alive
during refinement so splits of curved subsegments can place the new vertex on
the analytic arc, which may fall just outside the current piecewise-linear
boundary. Region labels are maintained incrementally; constraints store on
which directed side the fluid interior lies.

Float predicates fall back to exact rational arithmetic near degeneracy, so
the construction is deterministic and safe for symmetric inputs.
"""

from __future__ import annotations

import heapq
import math
from fractions import Fraction

from .errors import MeshingError

INTERIOR = 0
EXTERIOR = 1
HOLE = 2
UNSET = -1

_EPS_ORIENT = 4e-16
_EPS_INCIRCLE = 2e-15


def _orient(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the area of (a, b, c): +1 CCW, -1 CW, 0 collinear."""
    t1 = (bx - ax) * (cy - ay)
    t2 = (by - ay) * (cx - ax)
    det = t1 - t2
    bound = _EPS_ORIENT * (abs(t1) + abs(t2))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    det = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) \
        - (Fraction(by) - Fraction(ay)) * (Fraction(cx) - Fraction(ax))
    return (det > 0) - (det < 0)


def _incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """+1 if d lies strictly inside the circumcircle of CCW (a, b, c)."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    t1 = ad * (bdx * cdy - bdy * cdx)
    t2 = bd * (adx * cdy - ady * cdx)
    t3 = cd * (adx * bdy - ady * bdx)
    det = t1 - t2 + t3
    bound = _EPS_INCIRCLE * (abs(t1) + abs(t2) + abs(t3))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    fadx, fady = Fraction(ax) - Fraction(dx), Fraction(ay) - Fraction(dy)
    fbdx, fbdy = Fraction(bx) - Fraction(dx), Fraction(by) - Fraction(dy)
    fcdx, fcdy = Fraction(cx) - Fraction(dx), Fraction(cy) - Fraction(dy)
    fad = fadx * fadx + fady * fady
    fbd = fbdx * fbdx + fbdy * fbdy
    fcd = fcdx * fcdx + fcdy * fcdy
    det = fad * (fbdx * fcdy - fbdy * fcdx) \
        - fbd * (fadx * fcdy - fady * fcdx) \
        + fcd * (fadx * fbdy - fady * fbdx)
    return (det > 0) - (det < 0)


class Triangulator:
    """Mutable CDT over a tagged planar straight-line graph."""

    def __init__(self, points, segments, curves, hole_seeds, node_budget=300_000):
        self.vx: list[float] = []
        self.vy: list[float] = []
        self.tris: list[tuple[int, int, int] | None] = []
        self.region: list[int] = []
        self.adj: dict[tuple[int, int], int] = {}
        self.vert_tri: list[int] = []
        # canonical (min,max) -> (tag, curve, interior_left_of_min_to_max)
        self.constraints: dict[tuple[int, int], tuple[str, tuple | None, bool]] = {}
        self.node_budget = node_budget
        self._last_tri = 0

        self._build(points, segments, curves)
        self._classify(hole_seeds)

    # -- basic structure ----------------------------------------------------

    def _new_vertex(self, x, y) -> int:
        self.vx.append(float(x))
        self.vy.append(float(y))
        self.vert_tri.append(-1)
        if len(self.vx) > self.node_budget:
            raise MeshingError(
                "node budget exceeded during refinement; use a larger target edge length")
        return len(self.vx) - 1

    def _add_tri(self, a, b, c, region) -> int:
        ti = len(self.tris)
        self.tris.append((a, b, c))
        self.region.append(region)
        self.adj[(a, b)] = ti
        self.adj[(b, c)] = ti
        self.adj[(c, a)] = ti
        self.vert_tri[a] = ti
        self.vert_tri[b] = ti
        self.vert_tri[c] = ti
        return ti

    def _remove_tri(self, ti):
        a, b, c = self.tris[ti]
        for e in ((a, b), (b, c), (c, a)):
            if self.adj.get(e) == ti:
                del self.adj[e]
        self.tris[ti] = None
        self.region[ti] = UNSET

    def _tri_edges(self, ti):
        a, b, c = self.tris[ti]
        return ((a, b), (b, c), (c, a))

    def orient(self, a, b, c) -> int:
        return _orient(self.vx[a], self.vy[a], self.vx[b], self.vy[b],
                       self.vx[c], self.vy[c])

    def _in_circum(self, ti, x, y) -> bool:
        a, b, c = self.tris[ti]
        return _incircle(self.vx[a], self.vy[a], self.vx[b], self.vy[b],
                         self.vx[c], self.vy[c], x, y) > 0

    def is_constrained(self, u, v) -> bool:
        return (u, v) in self.constraints or (v, u) in self.constraints

    # -- construction ---------------------------------------------------------

    def _build(self, points, segments, curves):
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        cx = (min(xs) + max(xs)) / 2.0
        cy = (min(ys) + max(ys)) / 2.0
        r = 4.0 * max(max(xs) - min(xs), max(ys) - min(ys), 1e-6)
        s0 = self._new_vertex(cx - 2.0 * r, cy - r)
        s1 = self._new_vertex(cx + 2.0 * r, cy - r)
        s2 = self._new_vertex(cx, cy + 2.0 * r)
        self._add_tri(s0, s1, s2, UNSET)
        self.n_super = 3

        vid = []
        for x, y in points:
            vid.append(self.insert_point(x, y))

        for (a, b, tag), curve in zip(segments, curves):
            va, vb = vid[a], vid[b]
            if va == vb:
                continue
            if not ((va, vb) in self.adj or (vb, va) in self.adj):
                self.insert_segment(va, vb)
            self._register_constraint(va, vb, tag, curve)

    def _register_constraint(self, a, b, tag, curve):
        key = (a, b) if a < b else (b, a)
        self.constraints[key] = (tag, curve, key == (a, b))

    def _constraint_children(self, a, b, m, entry):
        """Split constraint (a, b) at vertex m, preserving tag and side."""
        tag, curve, left = entry
        key = (a, b) if a < b else (b, a)
        del self.constraints[key]
        # Direction with interior on the left.
        da, db = (key if left else (key[1], key[0]))
        for (u, v) in ((da, m), (m, db)):
            k = (u, v) if u < v else (v, u)
            self.constraints[k] = (tag, curve, k == (u, v))

    # -- point location -------------------------------------------------------

    def locate(self, x, y, hint=None, cross_block=True):
        """Containing triangle of (x, y).

        Returns (ti, kind, edge): kind is "in" or "edge". When the straight
        walk is blocked by a constrained edge (with cross_block), returns
        (None, "blocked", edge). Falls back to an exhaustive scan if the walk
        does not settle.
        """
        ti = hint if hint is not None and self.tris[hint] is not None else None
        if ti is None:
            ti = self._last_tri if self.tris[self._last_tri] is not None else \
                next(i for i, t in enumerate(self.tris) if t is not None)
        prev = -1
        for _ in range(4 * len(self.tris) + 16):
            tri = self.tris[ti]
            on_edge = None
            nxt = None
            for (u, v) in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                o = _orient(self.vx[u], self.vy[u], self.vx[v], self.vy[v], x, y)
                if o < 0:
                    cand = self.adj.get((v, u))
                    if cand is not None and cand == prev:
                        continue
                    if cross_block and self.is_constrained(u, v):
                        return None, "blocked", (u, v)
                    if cand is None:
                        return None, "blocked", (u, v)
                    nxt = cand
                    break
                if o == 0:
                    on_edge = (u, v)
            if nxt is None:
                self._last_tri = ti
                if on_edge is not None:
                    # Only an edge point if within the edge's span.
                    return ti, "edge", on_edge
                return ti, "in", None
            prev, ti = ti, nxt
        return self._locate_exhaustive(x, y)

    def _locate_exhaustive(self, x, y):
        for ti, tri in enumerate(self.tris):
            if tri is None:
                continue
            a, b, c = tri
            o1 = self.orient_pt(a, b, x, y)
            o2 = self.orient_pt(b, c, x, y)
            o3 = self.orient_pt(c, a, x, y)
            if o1 >= 0 and o2 >= 0 and o3 >= 0:
                if o1 == 0:
                    return ti, "edge", (a, b)
                if o2 == 0:
                    return ti, "edge", (b, c)
                if o3 == 0:
                    return ti, "edge", (c, a)
                return ti, "in", None
        raise MeshingError("point location failed")

    def orient_pt(self, u, v, x, y) -> int:
        return _orient(self.vx[u], self.vy[u], self.vx[v], self.vy[v], x, y)

    # -- insertion ------------------------------------------------------------

    def insert_point(self, x, y, hint=None, seeds=None, forbid=None):
        """Bowyer-Watson insertion; returns the new vertex id.

        ``seeds`` preseeds the cavity (used for splits); ``forbid`` is an
        undirected edge never treated as cavity boundary (the subsegment being
        split). The cavity never crosses constrained edges.
        """
        if seeds is None:
            ti, kind, edge = self.locate(x, y, hint, cross_block=False)
            if ti is None:
                raise MeshingError("insertion point outside triangulation")
            seeds = [ti]
            if kind == "edge":
                u, v = edge
                other = self.adj.get((v, u))
                if self.is_constrained(u, v) and forbid is None:
                    raise MeshingError("point insertion on a constrained edge")
                if other is not None:
                    seeds.append(other)

        cavity: list[int] = []
        in_cavity: set[int] = set()
        stack = list(seeds)
        for s in seeds:
            in_cavity.add(s)
        while stack:
            ti = stack.pop()
            cavity.append(ti)
            for (u, v) in self._tri_edges(ti):
                if forbid is not None and ((u, v) == forbid or (v, u) == forbid):
                    continue
                if self.is_constrained(u, v):
                    continue
                nb = self.adj.get((v, u))
                if nb is None or nb in in_cavity:
                    continue
                if self._in_circum(nb, x, y):
                    in_cavity.add(nb)
                    stack.append(nb)

        boundary: list[tuple[int, int, int]] = []  # (u, v, region-of-inner-tri)
        for ti in cavity:
            reg = self.region[ti]
            for (u, v) in self._tri_edges(ti):
                if forbid is not None and ((u, v) == forbid or (v, u) == forbid):
                    continue
                nb = self.adj.get((v, u))
                if nb is None or nb not in in_cavity:
                    boundary.append((u, v, reg))

        vi = self._new_vertex(x, y)
        for ti in cavity:
            self._remove_tri(ti)
        created = []
        for (u, v, reg) in boundary:
            if self.orient(u, v, vi) <= 0:
                raise MeshingError("degenerate cavity fan (duplicate or collinear point)")
            created.append(self._add_tri(u, v, vi, reg))
        self._last_tri = created[-1] if created else self._last_tri
        return vi

    # -- segment recovery -------------------------------------------------------

    def insert_segment(self, a, b):
        """Force edge (a, b) into the triangulation by cavity re-triangulation."""
        if (a, b) in self.adj or (b, a) in self.adj:
            return
        # Find the triangle around `a` whose wedge the segment enters.
        start = None
        ti0 = self.vert_tri[a]
        seen = set()
        stack = [ti0]
        while stack:
            ti = stack.pop()
            if ti in seen or self.tris[ti] is None:
                continue
            seen.add(ti)
            tri = self.tris[ti]
            if a not in tri:
                continue
            i = tri.index(a)
            u = tri[(i + 1) % 3]
            v = tri[(i + 2) % 3]
            ou = self.orient(a, b, u)
            ov = self.orient(a, b, v)
            if ou == 0 and self._between(a, b, u):
                self.insert_segment(a, u)
                self.insert_segment(u, b)
                return
            if ov == 0 and self._between(a, b, v):
                self.insert_segment(a, v)
                self.insert_segment(v, b)
                return
            if ou > 0 and ov < 0:
                start = (ti, u, v)
                break
            for e in self._tri_edges(ti):
                nb = self.adj.get((e[1], e[0]))
                if nb is not None and nb not in seen and a in self.tris[nb]:
                    stack.append(nb)
        if start is None:
            raise MeshingError("segment recovery failed to find a starting wedge")

        ti, u, v = start
        to_delete = [ti]
        left = [u]
        right = [v]
        regions = [self.region[ti]]
        while True:
            if self.is_constrained(u, v):
                raise MeshingError("input segments cross each other")
            nb = self.adj.get((v, u))
            if nb is None:
                raise MeshingError("segment walk left the triangulation")
            tri = self.tris[nb]
            w = next(p for p in tri if p != u and p != v)
            to_delete.append(nb)
            regions.append(self.region[nb])
            if w == b:
                break
            o = self.orient(a, b, w)
            if o == 0 and self._between(a, b, w):
                # A vertex sits exactly on the segment: recurse on both halves.
                self.insert_segment(a, w)
                self.insert_segment(w, b)
                return
            if o > 0:
                left.append(w)
                u = w
            else:
                right.append(w)
                v = w

        region = regions[0]
        for ti in to_delete:
            self._remove_tri(ti)
        self._fill_chain(a, b, left, region)          # left chain: interior left of a->b
        self._fill_chain(b, a, list(reversed(right)), region)
        self._last_tri = self.adj[(a, b)]

    def _between(self, a, b, w) -> bool:
        ax, ay, bx, by = self.vx[a], self.vy[a], self.vx[b], self.vy[b]
        wx, wy = self.vx[w], self.vy[w]
        dot = (wx - ax) * (bx - ax) + (wy - ay) * (by - ay)
        return 0 < dot < (bx - ax) ** 2 + (by - ay) ** 2

    def _fill_chain(self, u, w, chain, region):
        """Triangulate the pseudo-polygon left of u->w bounded by `chain`."""
        if not chain:
            return
        c = chain[0]
        ci = 0
        for i in range(1, len(chain)):
            d = chain[i]
            if _incircle(self.vx[u], self.vy[u], self.vx[w], self.vy[w],
                         self.vx[c], self.vy[c], self.vx[d], self.vy[d]) > 0:
                c, ci = d, i
        self._fill_chain(u, c, chain[:ci], region)
        self._fill_chain(c, w, chain[ci + 1:], region)
        if self.orient(u, w, c) <= 0:
            raise MeshingError("degenerate pseudo-polygon triangle")
        self._add_tri(u, w, c, region)

    # -- region classification ----------------------------------------------

    def _classify(self, hole_seeds):
        for ti, tri in enumerate(self.tris):
            if tri is not None:
                self.region[ti] = UNSET
        # Exterior: flood from triangles touching the super-vertices.
        stack = [ti for ti, tri in enumerate(self.tris)
                 if tri is not None and (tri[0] < 3 or tri[1] < 3 or tri[2] < 3)]
        self._flood(stack, EXTERIOR)
        for (sx, sy) in hole_seeds:
            ti, _kind, _e = self.locate(sx, sy, cross_block=False)
            if ti is None or self.region[ti] != UNSET:
                raise MeshingError("hole seed fell outside its hole")
            self._flood([ti], HOLE)
        rest = [ti for ti, tri in enumerate(self.tris)
                if tri is not None and self.region[ti] == UNSET]
        self._flood(rest, INTERIOR)
        if not any(r == INTERIOR for r in self.region):
            raise MeshingError("outline encloses no interior region (degenerate outline)")

    def _flood(self, stack, value):
        for s in stack:
            self.region[s] = value
        stack = list(stack)
        while stack:
            ti = stack.pop()
            for (u, v) in self._tri_edges(ti):
                if self.is_constrained(u, v):
                    continue
                nb = self.adj.get((v, u))
                if nb is not None and self.region[nb] == UNSET:
                    self.region[nb] = value
                    stack.append(nb)

    def _reclassify_patch(self, patch):
        """Recompute regions for freshly created triangles after a split."""
        alive = [ti for ti in patch if self.tris[ti] is not None]
        alive_set = set(alive)
        for ti in alive:
            self.region[ti] = UNSET
        frontier = []
        for ti in alive:
            # Constraint side rules take precedence over neighbor inheritance.
            decided = False
            for (u, v) in self._tri_edges(ti):
                key = (u, v) if u < v else (v, u)
                entry = self.constraints.get(key)
                if entry is not None:
                    # (u, v) is CCW in tri, so tri lies to the left of u->v.
                    tri_is_interior = entry[2] == (key == (u, v))
                    self.region[ti] = INTERIOR if tri_is_interior else EXTERIOR
                    frontier.append(ti)
                    decided = True
                    break
            if decided:
                continue
            for (u, v) in self._tri_edges(ti):
                nb = self.adj.get((v, u))
                if nb is not None and nb not in alive_set and self.region[nb] != UNSET:
                    self.region[ti] = self.region[nb]
                    frontier.append(ti)
                    break
        # Spread within the patch across unconstrained edges.
        while frontier:
            ti = frontier.pop()
            for (u, v) in self._tri_edges(ti):
                if self.is_constrained(u, v):
                    continue
                nb = self.adj.get((v, u))
                if nb is not None and self.region[nb] == UNSET:
                    self.region[nb] = self.region[ti]
                    frontier.append(nb)
        for ti in alive:
            if self.tris[ti] is not None and self.region[ti] == UNSET:
                # Isolated pocket sealed by constraints on all sides: it can
                # only be the non-interior side of the split subsegment.
                self.region[ti] = EXTERIOR

    # -- refinement ------------------------------------------------------------

    def refine(self, min_angle_deg: float, max_edge: float):
        min_angle = math.radians(min_angle_deg)
        seq = 0
        seg_heap: list[tuple[float, int, tuple[int, int]]] = []
        tri_heap: list[tuple[tuple, int, int, tuple[int, int, int]]] = []

        def push_seg(key):
            nonlocal seq
            if self._encroached(key):
                heapq.heappush(seg_heap, (-self._edge_len2(*key), seq, key))
                seq += 1

        def push_tri(ti):
            nonlocal seq
            tri = self.tris[ti]
            if tri is None or self.region[ti] != INTERIOR:
                return
            bad = self._badness(tri, min_angle, max_edge)
            if bad is not None:
                heapq.heappush(tri_heap, (bad, seq, ti, tri))
                seq += 1

        for key in list(self.constraints):
            push_seg(key)
        for ti, tri in enumerate(self.tris):
            if tri is not None:
                push_tri(ti)

        guard = 0
        while seg_heap or tri_heap:
            guard += 1
            if guard > 40 * self.node_budget:
                raise MeshingError("refinement failed to terminate")
            if seg_heap:
                _k, _s, key = heapq.heappop(seg_heap)
                if key not in self.constraints:
                    continue
                if not self._encroached(key):
                    continue
                created = self._split_subsegment(key)
                for ti in created:
                    push_tri(ti)
                for k2 in self._constraint_keys_near(created):
                    push_seg(k2)
                continue

            bad, _s, ti, tri = heapq.heappop(tri_heap)
            if self.tris[ti] is not tri or self.region[ti] != INTERIOR:
                continue
            if self._badness(tri, min_angle, max_edge) is None:
                continue
            cc = self._circumcenter(tri)
            if cc is None:
                continue
            blocked = self._cc_blockers(ti, cc)
            if blocked:
                requeue = False
                for key in blocked:
                    if key in self.constraints:
                        created = self._split_subsegment(key)
                        requeue = True
                        for t2 in created:
                            push_tri(t2)
                        for k2 in self._constraint_keys_near(created):
                            push_seg(k2)
                if requeue:
                    push_tri(ti)
                continue
            ti2, kind, edge = self.locate(cc[0], cc[1], hint=ti)
            if ti2 is None:
                # Blocked during the final walk: split that subsegment.
                key = (edge[0], edge[1]) if edge[0] < edge[1] else (edge[1], edge[0])
                if key in self.constraints:
                    created = self._split_subsegment(key)
                    for t2 in created:
                        push_tri(t2)
                    for k2 in self._constraint_keys_near(created):
                        push_seg(k2)
                    push_tri(ti)
                continue
            if self._too_close(cc, ti2):
                continue
            # A circumcenter inside the diametral circle of a subsegment must
            # not be inserted; split the subsegment instead (otherwise the
            # center can land arbitrarily close to the boundary and cycle).
            encroached = self._point_encroaches(cc, ti2)
            if encroached:
                for key in encroached:
                    if key in self.constraints:
                        created = self._split_subsegment(key)
                        for t2 in created:
                            push_tri(t2)
                        for k2 in self._constraint_keys_near(created):
                            push_seg(k2)
                push_tri(ti)
                continue
            before = len(self.tris)
            try:
                self.insert_point(cc[0], cc[1], hint=ti2)
            except MeshingError:
                continue
            for t2 in range(before, len(self.tris)):
                if self.tris[t2] is not None:
                    push_tri(t2)
            for k2 in self._constraint_keys_near(range(before, len(self.tris))):
                push_seg(k2)

    def _edge_len2(self, u, v) -> float:
        return (self.vx[u] - self.vx[v]) ** 2 + (self.vy[u] - self.vy[v]) ** 2

    def _badness(self, tri, min_angle, max_edge):
        """Priority key if the triangle violates size or angle; else None."""
        a, b, c = tri
        l_ab = self._edge_len2(a, b)
        l_bc = self._edge_len2(b, c)
        l_ca = self._edge_len2(c, a)
        longest = max(l_ab, l_bc, l_ca)
        if longest > (1.0 + 1e-12) * max_edge * max_edge:
            return (0, -longest)
        ang = self._min_angle(tri)
        if ang < min_angle - 1e-12:
            return (1, ang)
        return None

    def _min_angle(self, tri) -> float:
        a, b, c = tri
        l2 = sorted([self._edge_len2(a, b), self._edge_len2(b, c), self._edge_len2(c, a)])
        # Smallest angle is opposite the shortest edge.
        s0, s1, s2 = l2
        denom = 2.0 * math.sqrt(s1 * s2)
        if denom == 0:
            return 0.0
        cosv = (s1 + s2 - s0) / denom
        return math.acos(max(-1.0, min(1.0, cosv)))

    def _circumcenter(self, tri):
        a, b, c = tri
        ax, ay = self.vx[a], self.vy[a]
        bx, by = self.vx[b], self.vy[b]
        cx, cy = self.vx[c], self.vy[c]
        d = 2.0 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))
        if d == 0:
            return None
        b2 = (bx - ax) ** 2 + (by - ay) ** 2
        c2 = (cx - ax) ** 2 + (cy - ay) ** 2
        ux = ax + (b2 * (cy - ay) - c2 * (by - ay)) / d
        uy = ay + (c2 * (bx - ax) - b2 * (cx - ax)) / d
        return (ux, uy)

    def _too_close(self, p, ti) -> bool:
        tri = self.tris[ti]
        for v in tri:
            if (self.vx[v] - p[0]) ** 2 + (self.vy[v] - p[1]) ** 2 < 1e-24:
                return True
        return False

    def _point_encroaches(self, p, start) -> list[tuple[int, int]]:
        """Subsegments whose diametral circle contains p, among those bounding
        p's would-be insertion cavity."""
        x, y = p
        cavity = [start]
        seen = {start}
        stack = [start]
        while stack:
            ti = stack.pop()
            for (u, v) in self._tri_edges(ti):
                if self.is_constrained(u, v):
                    continue
                nb = self.adj.get((v, u))
                if nb is not None and nb not in seen and self._in_circum(nb, x, y):
                    seen.add(nb)
                    stack.append(nb)
                    cavity.append(nb)
        out = []
        done = set()
        for ti in cavity:
            for (u, v) in self._tri_edges(ti):
                key = (u, v) if u < v else (v, u)
                if key in done or key not in self.constraints:
                    continue
                done.add(key)
                mx = (self.vx[u] + self.vx[v]) / 2.0
                my = (self.vy[u] + self.vy[v]) / 2.0
                r2 = self._edge_len2(u, v) / 4.0
                if (x - mx) ** 2 + (y - my) ** 2 < r2 * (1.0 - 1e-12):
                    out.append(key)
        return out

    def _encroached(self, key) -> bool:
        u, v = key
        mx = (self.vx[u] + self.vx[v]) / 2.0
        my = (self.vy[u] + self.vy[v]) / 2.0
        r2 = self._edge_len2(u, v) / 4.0
        for (a, b) in ((u, v), (v, u)):
            ti = self.adj.get((a, b))
            if ti is None:
                continue
            w = next(p for p in self.tris[ti] if p != u and p != v)
            d2 = (self.vx[w] - mx) ** 2 + (self.vy[w] - my) ** 2
            if d2 < r2 * (1.0 - 1e-12):
                return True
        return False

    def _cc_blockers(self, ti, cc):
        """Constrained edges of `ti` that hide its circumcenter."""
        blockers = []
        tri = self.tris[ti]
        for (u, v) in self._tri_edges(ti):
            if not self.is_constrained(u, v):
                continue
            if self.orient_pt(u, v, cc[0], cc[1]) < 0:
                key = (u, v) if u < v else (v, u)
                blockers.append(key)
        return blockers

    def _split_point(self, key):
        """Midpoint of a subsegment, snapped to its source arc if curved."""
        u, v = key
        entry = self.constraints[key]
        curve = entry[1]
        if curve is None:
            return ((self.vx[u] + self.vx[v]) / 2.0, (self.vy[u] + self.vy[v]) / 2.0)
        cx, cy, r = curve
        tu = math.atan2(self.vy[u] - cy, self.vx[u] - cx)
        tv = math.atan2(self.vy[v] - cy, self.vx[v] - cx)
        d = tv - tu
        while d > math.pi:
            d -= 2.0 * math.pi
        while d < -math.pi:
            d += 2.0 * math.pi
        tm = tu + d / 2.0
        return (cx + r * math.cos(tm), cy + r * math.sin(tm))

    def _split_subsegment(self, key) -> list[int]:
        """Split constraint `key` at its (snapped) midpoint; returns new tris."""
        u, v = key
        entry = self.constraints[key]
        x, y = self._split_point(key)
        before = len(self.tris)

        curve = entry[1]
        if curve is None:
            seeds = []
            for (a, b) in ((u, v), (v, u)):
                ti = self.adj.get((a, b))
                if ti is not None:
                    seeds.append(ti)
            del self.constraints[key]
            mi = self.insert_point(x, y, seeds=seeds, forbid=(u, v))
            # Re-register before reclassification so side rules apply.
            self.constraints[key] = entry
            self._constraint_children(u, v, mi, entry)
        else:
            del self.constraints[key]
            hint = self.adj.get((u, v), self.adj.get((v, u)))
            try:
                mi = self.insert_point(x, y, hint=hint)
            except MeshingError:
                # Snapped point not reachable (can happen for near-degenerate
                # slivers): fall back to the plain chord midpoint.
                self.constraints[key] = entry
                return self._split_subsegment_straight(key)
            self.insert_segment(u, mi)
            self.insert_segment(mi, v)
            self.constraints[key] = entry
            self._constraint_children(u, v, mi, entry)
            self._reclassify_patch(list(range(before, len(self.tris))))

        return [ti for ti in range(before, len(self.tris)) if self.tris[ti] is not None]

    def _split_subsegment_straight(self, key) -> list[int]:
        u, v = key
        entry = self.constraints[key]
        x = (self.vx[u] + self.vx[v]) / 2.0
        y = (self.vy[u] + self.vy[v]) / 2.0
        before = len(self.tris)
        seeds = []
        for (a, b) in ((u, v), (v, u)):
            ti = self.adj.get((a, b))
            if ti is not None:
                seeds.append(ti)
        del self.constraints[key]
        mi = self.insert_point(x, y, seeds=seeds, forbid=(u, v))
        self.constraints[key] = entry
        self._constraint_children(u, v, mi, entry)
        return [ti for ti in range(before, len(self.tris)) if self.tris[ti] is not None]

    def _constraint_keys_near(self, tri_ids):
        keys = []
        seen = set()
        for ti in tri_ids:
            tri = self.tris[ti] if ti < len(self.tris) else None
            if tri is None:
                continue
            for (u, v) in self._tri_edges(ti):
                key = (u, v) if u < v else (v, u)
                if key in self.constraints and key not in seen:
                    seen.add(key)
                    keys.append(key)
        return keys

    # -- extraction -------------------------------------------------------------

    def interior_mesh(self):
        """Compacted (coords, triangles, boundary_edges) of the fluid region."""
        live = [(ti, tri) for ti, tri in enumerate(self.tris)
                if tri is not None and self.region[ti] == INTERIOR]
        used: dict[int, int] = {}
        for _ti, tri in live:
            for v in tri:
                if v not in used:
                    used[v] = -1
        order = sorted(used)
        for new, old in enumerate(order):
            used[old] = new
        coords = [(self.vx[old], self.vy[old]) for old in order]
        triangles = [(used[a], used[b], used[c]) for _ti, (a, b, c) in live]
        boundary = []
        for key, (tag, _curve, _left) in self.constraints.items():
            u, v = key
            if u in used and v in used:
                has_interior_side = False
                for (a, b) in ((u, v), (v, u)):
                    ti = self.adj.get((a, b))
                    if ti is not None and self.region[ti] == INTERIOR:
                        has_interior_side = True
                if has_interior_side:
                    boundary.append((used[u], used[v], tag))
        return coords, triangles, boundary
