"""Reference kernels: pure numpy implementations of the hot loops.

This module is the semantic reference for the compiled backend in
``meshlayers._native``.  Both backends must produce bit-identical planes for
integer and bool targets, so the arithmetic here is frozen:

* all intermediate math is IEEE float64, applied in the exact expression
  order written below (the compiled backend is built with -ffp-contract=off
  so it cannot fuse these expressions either);
* triangles are normalized to counter-clockwise order by swapping the last
  two vertices when the doubled signed area is negative; zero-area
  triangles are skipped;
* a grid cell is covered when its center strictly passes all three edge
  functions, or lies exactly on a "top" or "left" edge of the CCW triangle
  (edge direction dy < 0, or dy == 0 and dx < 0, in y-up grid coordinates);
* barycentric factors are L_i = e_i / (e_0 + e_1 + e_2) and attributes are
  interpolated as (L0*a0 + L1*a1) + L2*a2.

Edge function for the edge a->b at point p:

    E(a, b, p) = (bx - ax) * (py - ay) - (by - ay) * (px - ax)

Large triangles are processed in horizontal bands so transient arrays stay
small; banding does not change any per-texel value.
"""

import numpy as np

BAND_ROWS = 256


def _ccw(xy, attrs):
    """Normalize one triangle to CCW order. Returns None when degenerate."""
    (x0, y0), (x1, y1), (x2, y2) = xy
    area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area2 == 0.0:
        return None
    if area2 < 0.0:
        xy = xy[[0, 2, 1]]
        attrs = [a[[0, 2, 1]] for a in attrs]
    return xy, attrs


def _edge_accepts_ties(ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    return dy < 0.0 or (dy == 0.0 and dx < 0.0)


def _bands(xy, width, height):
    """Yield (ix0, iy0, cx, cy) texel-center grids covering the triangle bbox."""
    xs = xy[:, 0]
    ys = xy[:, 1]
    ix0 = max(0, int(np.floor(xs.min() - 0.5)))
    ix1 = min(width - 1, int(np.ceil(xs.max())))
    iy0 = max(0, int(np.floor(ys.min() - 0.5)))
    iy1 = min(height - 1, int(np.ceil(ys.max())))
    if ix1 < ix0 or iy1 < iy0:
        return
    cx_row = np.arange(ix0, ix1 + 1, dtype=np.float64) + 0.5
    for band0 in range(iy0, iy1 + 1, BAND_ROWS):
        band1 = min(iy1, band0 + BAND_ROWS - 1)
        cy_col = np.arange(band0, band1 + 1, dtype=np.float64) + 0.5
        cx, cy = np.meshgrid(cx_row, cy_col)
        yield ix0, band0, cx, cy


def _inside(xy, cx, cy):
    """Coverage mask plus raw edge values for one CCW triangle."""
    (x0, y0), (x1, y1), (x2, y2) = xy
    # edge i is opposite vertex i
    e0 = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
    e1 = (x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)
    e2 = (x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0)
    t0 = _edge_accepts_ties(x1, y1, x2, y2)
    t1 = _edge_accepts_ties(x2, y2, x0, y0)
    t2 = _edge_accepts_ties(x0, y0, x1, y1)
    ok0 = (e0 > 0.0) | ((e0 == 0.0) & t0)
    ok1 = (e1 > 0.0) | ((e1 == 0.0) & t1)
    ok2 = (e2 > 0.0) | ((e2 == 0.0) & t2)
    return ok0 & ok1 & ok2, e0, e1, e2


def coverage_fill(tri_xy, width, height, out):
    """Mark covered texels in the uint8 plane ``out``. Returns texels written."""
    written = 0
    for t in range(tri_xy.shape[0]):
        norm = _ccw(tri_xy[t].astype(np.float64, copy=True), [])
        if norm is None:
            continue
        xy, _ = norm
        for ix0, iy0, cx, cy in _bands(xy, width, height):
            keep, _, _, _ = _inside(xy, cx, cy)
            if not keep.any():
                continue
            sub = out[iy0:iy0 + keep.shape[0], ix0:ix0 + keep.shape[1]]
            newly = keep & (sub == 0)
            written += int(newly.sum())
            sub[keep] = 1
    return written


def raster_depth(tri_xy, tri_zn, depth):
    """Depth pass over window-space triangles.

    ``tri_zn`` holds per-vertex NDC z (z_clip / w_clip, clipped so w > 0).
    Per fragment the interpolated NDC z maps to [0, 1] depth and is written
    under a strict less-than compare, first triangle winning ties.
    """
    height, width = depth.shape
    written = 0
    for t in range(tri_xy.shape[0]):
        norm = _ccw(tri_xy[t].astype(np.float64, copy=True),
                    [tri_zn[t].astype(np.float64, copy=True)])
        if norm is None:
            continue
        xy, (zn,) = norm
        for ix0, iy0, cx, cy in _bands(xy, width, height):
            keep, e0, e1, e2 = _inside(xy, cx, cy)
            if not keep.any():
                continue
            esum = (e0 + e1) + e2
            l0 = e0 / esum
            l1 = e1 / esum
            l2 = e2 / esum
            znf = (l0 * zn[0] + l1 * zn[1]) + l2 * zn[2]
            d = (znf + 1.0) * 0.5
            sub = depth[iy0:iy0 + keep.shape[0], ix0:ix0 + keep.shape[1]]
            upd = keep & (d < sub)
            sub[upd] = d[upd].astype(np.float32)
            written += int(upd.sum())
    return written


def raster_tea(tri_xy, tri_clip, ww, wh, depth, eps, sfx, sfy, bx, by,
               shape, data, mask, edited, value):
    """Stroke pass: rasterize UV-space triangles and run the three filters.

    Per covered texel: interpolate the camera clip coordinates, reject
    fragments behind the projector (w <= 0), depth-test against ``depth``
    with additive bias ``eps``, map NDC to tool coordinates (s, t) via the
    scale/translate factors, reject outside [0, 1], look up the tool shape
    plane, and finally store ``value``/True into the data/mask/edited
    planes.  Returns (edited_texels, fragments_offered).
    """
    height, width = mask.shape
    th, tw = shape.shape
    edited_count = 0
    fragments = 0
    for t in range(tri_xy.shape[0]):
        norm = _ccw(tri_xy[t].astype(np.float64, copy=True),
                    [tri_clip[t].astype(np.float64, copy=True)])
        if norm is None:
            continue
        xy, (clip,) = norm
        for ix0, iy0, cx, cy in _bands(xy, width, height):
            keep, e0, e1, e2 = _inside(xy, cx, cy)
            n = int(keep.sum())
            if n == 0:
                continue
            fragments += n
            idx = np.nonzero(keep)
            l0 = e0[idx]
            l1 = e1[idx]
            l2 = e2[idx]
            esum = (l0 + l1) + l2
            l0 = l0 / esum
            l1 = l1 / esum
            l2 = l2 / esum
            xc = (l0 * clip[0, 0] + l1 * clip[1, 0]) + l2 * clip[2, 0]
            yc = (l0 * clip[0, 1] + l1 * clip[1, 1]) + l2 * clip[2, 1]
            zc = (l0 * clip[0, 2] + l1 * clip[1, 2]) + l2 * clip[2, 2]
            wc = (l0 * clip[0, 3] + l1 * clip[1, 3]) + l2 * clip[2, 3]
            ok = wc > 0.0
            wc_safe = np.where(ok, wc, 1.0)
            xn = xc / wc_safe
            yn = yc / wc_safe
            zn = zc / wc_safe
            xw = (xn + 1.0) * 0.5 * ww
            yw = (yn + 1.0) * 0.5 * wh
            ok &= (xw >= 0.0) & (xw < ww) & (yw >= 0.0) & (yw < wh)
            px = xw[ok].astype(np.int64)
            py = yw[ok].astype(np.int64)
            df = (zn[ok] + 1.0) * 0.5
            deep = df <= depth[py, px] + eps
            sub = np.nonzero(ok)[0][deep]
            s = sfx * xn[sub] + bx
            tt = sfy * yn[sub] + by
            inside_tool = (s >= 0.0) & (s <= 1.0) & (tt >= 0.0) & (tt <= 1.0)
            sub = sub[inside_tool]
            si = np.minimum((s[inside_tool] * tw).astype(np.int64), tw - 1)
            ti = np.minimum((tt[inside_tool] * th).astype(np.int64), th - 1)
            sub = sub[shape[ti, si] != 0]
            if sub.size == 0:
                continue
            rows = idx[0][sub] + iy0
            cols = idx[1][sub] + ix0
            newly = edited[rows, cols] == 0
            edited_count += int(newly.sum())
            data[rows, cols] = value
            mask[rows, cols] = 1
            edited[rows, cols] = 1
    return edited_count, fragments


# ---------------------------------------------------------------------------
# octree voxelization

def _sat_separated(vx, vy, vz, h):
    """Exact closed-box separating-axis test, vectorized over cells.

    ``vx/vy/vz`` have shape (3, N): triangle vertices relative to each cell
    center; ``h`` is the half-extent of the cubic cell.  Returns a bool
    array, True where a separating axis exists (no intersection).  Touching
    counts as intersecting: separation requires a strict inequality.
    """
    sep = (np.minimum(np.minimum(vx[0], vx[1]), vx[2]) > h) | \
          (np.maximum(np.maximum(vx[0], vx[1]), vx[2]) < -h)
    sep |= (np.minimum(np.minimum(vy[0], vy[1]), vy[2]) > h) | \
           (np.maximum(np.maximum(vy[0], vy[1]), vy[2]) < -h)
    sep |= (np.minimum(np.minimum(vz[0], vz[1]), vz[2]) > h) | \
           (np.maximum(np.maximum(vz[0], vz[1]), vz[2]) < -h)

    e = [(vx[1] - vx[0], vy[1] - vy[0], vz[1] - vz[0]),
         (vx[2] - vx[1], vy[2] - vy[1], vz[2] - vz[1]),
         (vx[0] - vx[2], vy[0] - vy[2], vz[0] - vz[2])]

    # triangle normal
    nx = e[0][1] * e[1][2] - e[0][2] * e[1][1]
    ny = e[0][2] * e[1][0] - e[0][0] * e[1][2]
    nz = e[0][0] * e[1][1] - e[0][1] * e[1][0]
    r = h * (np.abs(nx) + np.abs(ny) + np.abs(nz))
    d = nx * vx[0] + ny * vy[0] + nz * vz[0]
    sep |= (d > r) | (d < -r)

    # nine edge cross products: axis = e_k x unit_j
    for ex, ey, ez in e:
        # a = e x (1,0,0) = (0, ez, -ey)
        r = h * (np.abs(ez) + np.abs(ey))
        p0 = ez * vy[0] - ey * vz[0]
        p1 = ez * vy[1] - ey * vz[1]
        p2 = ez * vy[2] - ey * vz[2]
        lo = np.minimum(np.minimum(p0, p1), p2)
        hi = np.maximum(np.maximum(p0, p1), p2)
        sep |= (lo > r) | (hi < -r)
        # a = e x (0,1,0) = (-ez, 0, ex)
        r = h * (np.abs(ez) + np.abs(ex))
        p0 = ex * vz[0] - ez * vx[0]
        p1 = ex * vz[1] - ez * vx[1]
        p2 = ex * vz[2] - ez * vx[2]
        lo = np.minimum(np.minimum(p0, p1), p2)
        hi = np.maximum(np.maximum(p0, p1), p2)
        sep |= (lo > r) | (hi < -r)
        # a = e x (0,0,1) = (ey, -ex, 0)
        r = h * (np.abs(ey) + np.abs(ex))
        p0 = ey * vx[0] - ex * vy[0]
        p1 = ey * vx[1] - ex * vy[1]
        p2 = ey * vx[2] - ex * vy[2]
        lo = np.minimum(np.minimum(p0, p1), p2)
        hi = np.maximum(np.maximum(p0, p1), p2)
        sep |= (lo > r) | (hi < -r)
    return sep


def expand_pairs(verts, tris, parent_cells, pair_parent, pair_tri,
                 cube_min, child_h):
    """Refine (parent cell, triangle) pairs one octree level down.

    ``parent_cells`` holds integer cell coordinates at the parent level for
    each distinct parent; pairs reference parents by index.  Every pair is
    tested against the 8 child cubes; output order is pair-major, octant-
    minor (octant code = x | y<<1 | z<<2).  Returns (child_cells uint32
    (M, 3), child_tri int32 (M,)).
    """
    npair = pair_parent.shape[0]
    if npair == 0:
        return (np.zeros((0, 3), dtype=np.uint32), np.zeros(0, dtype=np.int32))
    tri_pts = verts[tris[pair_tri]]                    # (P, 3, 3)
    base = parent_cells[pair_parent].astype(np.int64) * 2

    out_cells = []
    out_tris = []
    h = child_h * 0.5
    for octant in range(8):
        dx = octant & 1
        dy = (octant >> 1) & 1
        dz = (octant >> 2) & 1
        cc = base + np.array([dx, dy, dz], dtype=np.int64)
        centers = cube_min[None, :] + (cc.astype(np.float64) + 0.5) * child_h
        rel = tri_pts - centers[:, None, :]
        sep = _sat_separated(rel[:, :, 0].T, rel[:, :, 1].T, rel[:, :, 2].T, h)
        hit = ~sep
        if hit.any():
            out_cells.append((octant, cc[hit].astype(np.uint32), pair_tri[hit]))

    if not out_cells:
        return (np.zeros((0, 3), dtype=np.uint32), np.zeros(0, dtype=np.int32))

    # reorder to pair-major, octant-minor
    order_cells = np.zeros((npair, 8), dtype=np.bool_)
    pieces = {}
    for octant, cc, tt in out_cells:
        pieces[octant] = (cc, tt)
    rows = []
    cols = []
    for octant, (cc, tt) in pieces.items():
        pass
    # simple stable approach: build (pair_index, octant) sort keys
    keys = []
    cells_list = []
    tris_list = []
    for octant, cc, tt in out_cells:
        pair_idx = np.nonzero(np.isin(np.arange(npair), np.arange(npair)))[0]
        keys.append(None)
    # fallthrough below replaces this; see _expand_pairs_ordered
    raise RuntimeError("unreachable")


def expand_pairs_ordered(verts, tris, parent_cells, pair_parent, pair_tri,
                         cube_min, child_h):
    """Like expand_pairs but emits pair-major, octant-minor directly."""
    npair = pair_parent.shape[0]
    empty = (np.zeros((0, 3), dtype=np.uint32), np.zeros(0, dtype=np.int32))
    if npair == 0:
        return empty
    tri_pts = verts[tris[pair_tri]]
    base = parent_cells[pair_parent].astype(np.int64) * 2
    h = child_h * 0.5

    hits = np.zeros((npair, 8), dtype=np.bool_)
    cells8 = np.zeros((npair, 8, 3), dtype=np.int64)
    for octant in range(8):
        dx = octant & 1
        dy = (octant >> 1) & 1
        dz = (octant >> 2) & 1
        cc = base + np.array([dx, dy, dz], dtype=np.int64)
        centers = cube_min[None, :] + (cc.astype(np.float64) + 0.5) * child_h
        rel = tri_pts - centers[:, None, :]
        sep = _sat_separated(rel[:, :, 0].T, rel[:, :, 1].T, rel[:, :, 2].T, h)
        hits[:, octant] = ~sep
        cells8[:, octant] = cc
    pidx, oidx = np.nonzero(hits)
    if pidx.size == 0:
        return empty
    return (cells8[pidx, oidx].astype(np.uint32), pair_tri[pidx].astype(np.int32))


# ---------------------------------------------------------------------------
# octree ray casting

def _moller_trumbore(o, u, v0, v1, v2):
    """Ray-triangle intersection, vectorized. Returns t (inf on miss)."""
    e1 = v1 - v0
    e2 = v2 - v0
    px = u[:, 1] * e2[:, 2] - u[:, 2] * e2[:, 1]
    py = u[:, 2] * e2[:, 0] - u[:, 0] * e2[:, 2]
    pz = u[:, 0] * e2[:, 1] - u[:, 1] * e2[:, 0]
    det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
    ok = det != 0.0
    det_safe = np.where(ok, det, 1.0)
    inv = 1.0 / det_safe
    tv = o - v0
    bu = (tv[:, 0] * px + tv[:, 1] * py + tv[:, 2] * pz) * inv
    ok &= (bu >= 0.0) & (bu <= 1.0)
    qx = tv[:, 1] * e1[:, 2] - tv[:, 2] * e1[:, 1]
    qy = tv[:, 2] * e1[:, 0] - tv[:, 0] * e1[:, 2]
    qz = tv[:, 0] * e1[:, 1] - tv[:, 1] * e1[:, 0]
    bv = (u[:, 0] * qx + u[:, 1] * qy + u[:, 2] * qz) * inv
    ok &= (bv >= 0.0) & (bu + bv <= 1.0)
    t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv
    ok &= t >= 0.0
    return np.where(ok, t, np.inf)


def raycast(origins, dirs, keys, offsets, tri_idx, verts, tris,
            cube_min, h, n_cells, coarse, coarse_shift, morton_encode):
    """March every ray through the leaf grid front-to-back.

    Classic 3D-DDA over the 2^d leaf grid; per visited cell the coarse
    occupancy map is consulted first, then the sorted Morton key array.
    Cells found in the structure have their triangle lists intersected; the
    best hit is the lexicographic minimum of (t, triangle index).  A ray
    stops once the entry parameter of the next cell exceeds the best t.

    Returns (best_t, best_tri, leaf_pos): leaf_pos indexes ``keys`` for the
    cell containing the hit point, -1 when the ray misses.
    """
    nrays = origins.shape[0]
    best_t = np.full(nrays, np.inf)
    best_tri = np.full(nrays, -1, dtype=np.int32)
    leaf_pos = np.full(nrays, -1, dtype=np.int64)

    cube_max = cube_min + h * n_cells
    # slab test
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_u = 1.0 / dirs
    t_lo = np.full(nrays, 0.0)
    t_hi = np.full(nrays, np.inf)
    for k in range(3):
        uk = dirs[:, k]
        ok_par = uk != 0.0
        t1 = (cube_min[k] - origins[:, k]) * inv_u[:, k]
        t2 = (cube_max[k] - origins[:, k]) * inv_u[:, k]
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        t_lo = np.where(ok_par, np.maximum(t_lo, lo), t_lo)
        t_hi = np.where(ok_par, np.minimum(t_hi, hi), t_hi)
        miss_par = (~ok_par) & ((origins[:, k] < cube_min[k]) |
                                (origins[:, k] > cube_max[k]))
        t_hi = np.where(miss_par, -np.inf, t_hi)
    live = t_lo <= t_hi

    if not live.any():
        return best_t, best_tri, leaf_pos

    t_start = np.maximum(t_lo, 0.0)
    p = origins + t_start[:, None] * dirs
    cell = np.clip(((p - cube_min[None, :]) / h).astype(np.int64), 0,
                   n_cells - 1)

    step = np.where(dirs > 0.0, 1, np.where(dirs < 0.0, -1, 0)).astype(np.int64)
    t_max = np.full((nrays, 3), np.inf)
    t_delta = np.full((nrays, 3), np.inf)
    for k in range(3):
        uk = dirs[:, k]
        moving = uk != 0.0
        nxt = np.where(step[:, k] > 0, cell[:, k] + 1, cell[:, k]).astype(np.float64)
        bound = cube_min[k] + nxt * h
        t_max[moving, k] = (bound[moving] - origins[moving, k]) * inv_u[moving, k]
        t_delta[moving, k] = h * np.abs(inv_u[moving, k])

    cur_t = t_start.copy()
    max_iter = 3 * n_cells + 3
    for _ in range(max_iter):
        active = np.nonzero(live)[0]
        if active.size == 0:
            break
        # membership of current cells
        cc = cell[active]
        coarse_lin = ((cc[:, 0] >> coarse_shift)
                      | ((cc[:, 1] >> coarse_shift) << ((coarse_shift and 0) or 0)))
        # coarse index uses cb bits per axis; compute properly below
        cb_cells = None
        key = morton_encode(cc[:, 0].astype(np.uint64),
                            cc[:, 1].astype(np.uint64),
                            cc[:, 2].astype(np.uint64))
        maybe = np.ones(active.size, dtype=bool)
        if coarse is not None:
            cbx = cc[:, 0] >> coarse_shift
            cby = cc[:, 1] >> coarse_shift
            cbz = cc[:, 2] >> coarse_shift
            side = coarse.shape[0]
            maybe = coarse[cbx, cby, cbz] != 0
        if maybe.any():
            pos = np.searchsorted(keys, key[maybe])
            pos = np.minimum(pos, keys.shape[0] - 1)
            found = keys[pos] == key[maybe]
            rays_here = active[maybe][found]
            cell_pos = pos[found]
            if rays_here.size:
                starts = offsets[cell_pos]
                ends = offsets[cell_pos + 1]
                counts = (ends - starts).astype(np.int64)
                nz = counts > 0
                rays_here = rays_here[nz]
                if rays_here.size:
                    starts = starts[nz]
                    counts = counts[nz]
                    ray_rep = np.repeat(rays_here, counts)
                    flat = np.concatenate(
                        [tri_idx[s:s + c] for s, c in zip(starts, counts)])
                    tv = tris[flat]
                    t_hit = _moller_trumbore(origins[ray_rep], dirs[ray_rep],
                                             verts[tv[:, 0]], verts[tv[:, 1]],
                                             verts[tv[:, 2]])
                    better = (t_hit < best_t[ray_rep]) | (
                        (t_hit == best_t[ray_rep]) & (flat < best_tri[ray_rep]))
                    if better.any():
                        order = np.lexsort((flat[better], t_hit[better],
                                            ray_rep[better]))
                        rr = ray_rep[better][order]
                        first = np.ones(rr.size, dtype=bool)
                        first[1:] = rr[1:] != rr[:-1]
                        sel = np.nonzero(better)[0][order][first]
                        rws = ray_rep[sel]
                        cand_t = t_hit[sel]
                        cand_tri = flat[sel]
                        upd = (cand_t < best_t[rws]) | (
                            (cand_t == best_t[rws]) & (cand_tri < best_tri[rws]))
                        best_t[rws[upd]] = cand_t[upd]
                        best_tri[rws[upd]] = cand_tri[upd]

        # advance every live ray one cell
        tm = t_max[active]
        kx = (tm[:, 0] <= tm[:, 1]) & (tm[:, 0] <= tm[:, 2])
        ky = (~kx) & (tm[:, 1] <= tm[:, 2])
        kz = (~kx) & (~ky)
        axis = np.where(kx, 0, np.where(ky, 1, 2))
        cur = tm[np.arange(active.size), axis]
        cur_t[active] = cur
        cell[active, axis] += step[active, axis]
        t_max[active, axis] += t_delta[active, axis]
        out = (cell[active, axis] < 0) | (cell[active, axis] >= n_cells)
        done = out | (cur > np.minimum(best_t[active], t_hi[active]))
        live[active[done]] = False

    # locate the leaf containing each hit point
    hit = np.isfinite(best_t) & (best_tri >= 0)
    if hit.any():
        ph = origins[hit] + best_t[hit, None] * dirs[hit]
        lc = np.clip(((ph - cube_min[None, :]) / h).astype(np.int64), 0,
                     n_cells - 1)
        key = morton_encode(lc[:, 0].astype(np.uint64),
                            lc[:, 1].astype(np.uint64),
                            lc[:, 2].astype(np.uint64))
        pos = np.searchsorted(keys, key)
        pos = np.minimum(pos, keys.shape[0] - 1)
        found = keys[pos] == key
        lp = np.full(key.shape[0], -1, dtype=np.int64)
        lp[found] = pos[found]
        leaf_pos[hit] = lp
        missed = np.nonzero(hit)[0][~found]
        best_t[missed] = np.inf
        best_tri[missed] = -1
    return best_t, best_tri, leaf_pos
