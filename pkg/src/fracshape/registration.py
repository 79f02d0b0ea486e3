"""Deterministic alignment search used by the shape difference metrics.

Finds an isometry (or rigid motion, or translation) of one cloud that
brings it close to another in Hausdorff distance.  The search is a
certified-upper-bound machine, not an optimizer with guarantees: every
reported value is an exact Hausdorff distance of some candidate
placement, so it can only overestimate the true infimum.

Stages, all deterministic for a fixed budget:

1. cheap candidates: identity, ball-center and centroid alignment,
   principal-axis alignments;
2. a coarse sweep over the rotation group (angle grid in the plane,
   low-discrepancy rotations in space, sign flips on the line),
   with translation tied to box centers, scored on subsamples;
3. refinement of the best few candidates: nearest-neighbour Procrustes
   iterations, golden-section on rotation angles, and compass pattern
   search on the translation with halving steps.

Budget counts Hausdorff evaluations (a coarse candidate counts as one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from fracshape.geometry import Transform

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0

__all__ = ["SearchParams", "SearchResult", "registration_search", "LIGHT_PARAMS"]


@dataclass(frozen=True)
class SearchParams:
    """Knobs for the alignment search.

    ``budget`` caps Hausdorff evaluations.  ``coarse_angles`` is the
    plane rotation grid, ``coarse_rotations`` the space rotation count.
    ``subsample`` bounds the cloud size used by the coarse sweep and
    ``refine_cap`` the size used inside refinement loops; the final
    reported value is always evaluated on the full clouds.
    """

    budget: int = 20_000
    coarse_angles: int = 720
    coarse_rotations: int = 600
    subsample: int = 320
    refine_cap: int = 1200
    top_k: int = 3
    icp_iters: int = 25
    seed: int = 0


# light preset for inner loops that run thousands of alignment problems
LIGHT_PARAMS = SearchParams(
    budget=2500,
    coarse_angles=48,
    coarse_rotations=160,
    subsample=192,
    refine_cap=900,
    top_k=2,
    icp_iters=12,
)


@dataclass(frozen=True)
class SearchResult:
    upper: float
    witness: Transform
    evals: int
    search_tol: float


def _stride_indices(n: int, cap: int) -> np.ndarray:
    if n <= cap:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, cap).round().astype(int))


def _halton(count: int, base: int) -> np.ndarray:
    out = np.empty(count)
    for i in range(count):
        f, r, x = 1.0, 0.0, i + 1
        while x > 0:
            f /= base
            r += f * (x % base)
            x //= base
        out[i] = r
    return out


_SO3_CACHE: dict[int, np.ndarray] = {}


def so3_grid(count: int) -> np.ndarray:
    """Deterministic low-discrepancy sample of the rotation group, as an
    array of (count, 3, 3) matrices."""
    got = _SO3_CACHE.get(count)
    if got is not None:
        return got
    u1 = _halton(count, 2)
    u2 = _halton(count, 3)
    u3 = _halton(count, 5)
    w = np.sqrt(1 - u1) * np.sin(2 * np.pi * u2)
    x = np.sqrt(1 - u1) * np.cos(2 * np.pi * u2)
    y = np.sqrt(u1) * np.sin(2 * np.pi * u3)
    z = np.sqrt(u1) * np.cos(2 * np.pi * u3)
    mats = np.empty((count, 3, 3))
    mats[:, 0, 0] = 1 - 2 * (y * y + z * z)
    mats[:, 0, 1] = 2 * (x * y - w * z)
    mats[:, 0, 2] = 2 * (x * z + w * y)
    mats[:, 1, 0] = 2 * (x * y + w * z)
    mats[:, 1, 1] = 1 - 2 * (x * x + z * z)
    mats[:, 1, 2] = 2 * (y * z - w * x)
    mats[:, 2, 0] = 2 * (x * z - w * y)
    mats[:, 2, 1] = 2 * (y * z + w * x)
    mats[:, 2, 2] = 1 - 2 * (x * x + y * y)
    mats.flags.writeable = False
    _SO3_CACHE[count] = mats
    return mats


def _rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _axis_rot(axis: int, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    m = np.eye(3)
    i, j = [(1, 2), (0, 2), (0, 1)][axis]
    m[i, i] = c
    m[j, j] = c
    m[i, j] = -s if axis != 1 else s
    m[j, i] = s if axis != 1 else -s
    return m


def _hausdorff_points(p: np.ndarray, q: np.ndarray) -> float:
    if p.shape[0] * q.shape[0] <= 250_000:
        d2 = ((p[:, None, :] - q[None, :, :]) ** 2).sum(-1)
        return math.sqrt(max(d2.min(1).max(), d2.min(0).max()))
    tq = cKDTree(q)
    tp = cKDTree(p)
    return max(float(tq.query(p, k=1)[0].max()), float(tp.query(q, k=1)[0].max()))


class _Pair:
    """One (A, B) alignment problem with caches and an eval counter.

    States are kept as (o, c_img): the candidate placement maps x to
    o @ (x - cen_b) + c_img, so c_img is where B's box center lands.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, params: SearchParams):
        self.a = a
        self.b = b
        self.dim = a.shape[1]
        self.params = params
        self.evals = 0

        self.cen_a = 0.5 * (a.min(0) + a.max(0))
        self.cen_b = 0.5 * (b.min(0) + b.max(0))
        self.mean_a = a.mean(0)
        self.mean_b = b.mean(0)

        self.sub_a = a[_stride_indices(a.shape[0], params.subsample)]
        self.sub_b = b[_stride_indices(b.shape[0], params.subsample)]
        self.ref_a = a[_stride_indices(a.shape[0], params.refine_cap)]
        self.ref_b = b[_stride_indices(b.shape[0], params.refine_cap)]
        self.tree_ref_a = cKDTree(self.ref_a)
        self.full_is_ref = self.ref_a.shape[0] == a.shape[0] and self.ref_b.shape[0] == b.shape[0]

        self.rad_b = float(np.sqrt(((b - self.cen_b) ** 2).sum(1)).max())

    def eval_refine(self, o: np.ndarray, c_img: np.ndarray) -> float:
        self.evals += 1
        bt = (self.ref_b - self.cen_b) @ o.T + c_img
        d1 = float(self.tree_ref_a.query(bt, k=1)[0].max())
        d2 = float(cKDTree(bt).query(self.ref_a, k=1)[0].max())
        return max(d1, d2)

    def eval_full(self, o: np.ndarray, c_img: np.ndarray) -> float:
        self.evals += 1
        bt = (self.b - self.cen_b) @ o.T + c_img
        return _hausdorff_points(self.a, bt)

    def coarse_scores(self, orthos: np.ndarray) -> np.ndarray:
        """Exact Hausdorff on the coarse subsamples for a batch of
        orthogonal candidates, box centers aligned."""
        k = orthos.shape[0]
        self.evals += k
        a_c = self.sub_a - self.cen_a
        a2 = (a_c**2).sum(1)
        bs = self.sub_b - self.cen_b
        scores = np.empty(k)
        cells = max(1, self.sub_a.shape[0] * self.sub_b.shape[0])
        chunk = max(1, 6_000_000 // cells)
        for lo in range(0, k, chunk):
            osub = orthos[lo : lo + chunk]
            rb = np.einsum("kij,nj->kni", osub, bs)
            b2 = (rb**2).sum(-1)
            cross = np.einsum("mi,kni->kmn", a_c, rb)
            d2 = a2[None, :, None] + b2[:, None, :] - 2.0 * cross
            np.maximum(d2, 0.0, out=d2)
            da = d2.min(axis=2).max(axis=1)
            db = d2.min(axis=1).max(axis=1)
            scores[lo : lo + chunk] = np.sqrt(np.maximum(da, db))
        return scores

    def to_transform(self, o: np.ndarray, c_img: np.ndarray) -> Transform:
        return Transform(o, c_img - o @ self.cen_b)


class _State:
    __slots__ = ("o", "c_img", "score")

    def __init__(self, o: np.ndarray, c_img: np.ndarray, score: float = math.inf):
        self.o = o
        self.c_img = c_img
        self.score = score


def _procrustes(src: np.ndarray, dst: np.ndarray, group: str, dim: int):
    """Least-squares fit dst ~ o @ src + t within the group."""
    ms, md = src.mean(0), dst.mean(0)
    if group == "translation":
        return np.eye(dim), md - ms
    h = (src - ms).T @ (dst - md)
    u, _, vt = np.linalg.svd(h)
    o = vt.T @ u.T
    if group == "rigid" and np.linalg.det(o) < 0:
        flip = np.eye(dim)
        flip[-1, -1] = -1.0
        o = vt.T @ flip @ u.T
    return o, md - o @ ms


def _icp(pair: _Pair, state: _State, group: str, tol: float) -> _State:
    best = _State(state.o, state.c_img.copy(), pair.eval_refine(state.o, state.c_img))
    o, c_img = state.o, state.c_img
    src_base = pair.ref_b - pair.cen_b
    stale = 0
    for _ in range(pair.params.icp_iters):
        if pair.evals >= pair.params.budget:
            break
        bt = src_base @ o.T + c_img
        _, ia = pair.tree_ref_a.query(bt, k=1)
        _, ib = cKDTree(bt).query(pair.ref_a, k=1)
        src = np.vstack([src_base, src_base[ib]])
        dst = np.vstack([pair.ref_a[ia], pair.ref_a])
        o, c_img = _procrustes(src, dst, group, pair.dim)
        score = pair.eval_refine(o, c_img)
        if score < best.score - 1e-15:
            best = _State(o, c_img.copy(), score)
            stale = 0
        else:
            stale += 1
            if stale >= 2:
                break
        if best.score <= tol * 1e-6:
            break
    return best


def _golden_angle(pair: _Pair, state: _State, axis, bracket: float, tol_angle: float) -> _State:
    """Golden-section over a pre-rotation angle; image center stays put."""

    def at(phi: float):
        if pair.dim == 2:
            o = _rot2(phi) @ state.o
        else:
            o = _axis_rot(axis, phi) @ state.o
        return o, pair.eval_refine(o, state.c_img)

    lo, hi = -bracket, bracket
    x1 = hi - _GOLD * (hi - lo)
    x2 = lo + _GOLD * (hi - lo)
    o1, f1 = at(x1)
    o2, f2 = at(x2)
    best = _State(state.o, state.c_img, state.score)
    while hi - lo > tol_angle and pair.evals < pair.params.budget:
        if f1 <= f2:
            hi, x2, f2, o2 = x2, x1, f1, o1
            x1 = hi - _GOLD * (hi - lo)
            o1, f1 = at(x1)
        else:
            lo, x1, f1, o1 = x1, x2, f2, o2
            x2 = lo + _GOLD * (hi - lo)
            o2, f2 = at(x2)
    for o, f in ((o1, f1), (o2, f2)):
        if f < best.score:
            best = _State(o, state.c_img, f)
    return best


def _compass(pair: _Pair, state: _State, step0: float, tol: float) -> _State:
    best = _State(state.o, state.c_img.copy(), state.score)
    step = step0
    dirs = np.vstack([np.eye(pair.dim), -np.eye(pair.dim)])
    while step > tol * 0.5 and pair.evals < pair.params.budget:
        moved = False
        for d in dirs:
            cand = best.c_img + step * d
            f = pair.eval_refine(best.o, cand)
            if f < best.score - 1e-15:
                best = _State(best.o, cand, f)
                moved = True
        if not moved:
            step *= 0.5
    return best


def _pca_orthos(a: np.ndarray, b: np.ndarray, group: str, dim: int) -> list[np.ndarray]:
    if a.shape[0] < 2 or b.shape[0] < 2:
        return []

    def axes(x: np.ndarray) -> np.ndarray:
        _, _, vt = np.linalg.svd(x - x.mean(0), full_matrices=True)
        return vt

    va, vb = axes(a), axes(b)
    out = []
    for signs in np.ndindex(*(2,) * dim):
        d = np.diag([1.0 if s == 0 else -1.0 for s in signs])
        o = va.T @ d @ vb
        if group == "rigid" and np.linalg.det(o) < 0:
            continue
        out.append(o)
    return out


def _refine(pair: _Pair, state: _State, group: str, tol: float, bracket: float) -> _State:
    state = _State(state.o, state.c_img, pair.eval_refine(state.o, state.c_img))
    if group != "translation":
        got = _icp(pair, state, group, tol)
        if got.score < state.score:
            state = got
    tol_angle = max(tol / max(pair.rad_b, 1e-12), 1e-7)
    extent = np.ptp(pair.a, axis=0).max() if pair.a.shape[0] > 1 else 1.0
    step0 = max(extent, 1e-9) / 4.0
    for _ in range(2):
        if group != "translation" and pair.rad_b > 0:
            if pair.dim == 2:
                state = _golden_angle(pair, state, None, bracket, tol_angle)
            else:
                for axis in (0, 1, 2):
                    state = _golden_angle(pair, state, axis, bracket, tol_angle)
        state = _compass(pair, state, step0, tol)
        step0 *= 0.25
        bracket *= 0.25
        if pair.evals >= pair.params.budget or state.score <= tol * 1e-6:
            break
    return state


def _search_line(pair: _Pair, group: str, tol: float) -> _State:
    a = np.sort(pair.a[:, 0])
    b = pair.b[:, 0]

    def directed(x: np.ndarray, y: np.ndarray) -> float:
        idx = np.searchsorted(y, x)
        left = np.abs(x - y[np.clip(idx - 1, 0, y.size - 1)])
        right = np.abs(x - y[np.clip(idx, 0, y.size - 1)])
        return float(np.minimum(left, right).max())

    signs = (1.0, -1.0) if group == "isometry" else (1.0,)
    best = (math.inf, 1.0, 0.0)
    span = (a.max() - a.min() + b.max() - b.min()) / 2.0 + tol

    for sign in signs:
        bs = np.sort(sign * b)

        def h_at(t: float, bs=bs) -> float:
            pair.evals += 1
            shifted = bs + t
            return max(directed(a, shifted), directed(shifted, a))

        t0 = (a.min() + a.max()) / 2.0 - (bs.min() + bs.max()) / 2.0
        cands = [t0, a.mean() - bs.mean(), a.min() - bs.min(), a.max() - bs.max()]
        ngrid = int(min(800, max(32, pair.params.budget // (2 * len(signs)))))
        cands.extend(t0 + np.linspace(-span, span, ngrid))
        f_best, t_best = min(((h_at(t), t) for t in cands), key=lambda p: p[0])
        width = 2 * span / ngrid
        lo, hi = t_best - width, t_best + width
        x1 = hi - _GOLD * (hi - lo)
        x2 = lo + _GOLD * (hi - lo)
        f1, f2 = h_at(x1), h_at(x2)
        while hi - lo > tol * 0.25 and pair.evals < pair.params.budget:
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLD * (hi - lo)
                f1 = h_at(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLD * (hi - lo)
                f2 = h_at(x2)
        f_best, t_best = min([(f_best, t_best), (f1, x1), (f2, x2)], key=lambda p: p[0])
        if f_best < best[0]:
            best = (f_best, sign, t_best)

    _, sign, t = best
    o = np.array([[sign]])
    c_img = o @ pair.cen_b + np.array([t])
    return _State(o, c_img, best[0])


def registration_search(
    a: np.ndarray,
    b: np.ndarray,
    group: str,
    params: SearchParams | None = None,
    tol: float | None = None,
) -> SearchResult:
    """Upper-bound search for inf over the group of h(A, g(B)).

    ``group`` is ``isometry`` (all isometries), ``rigid`` (orientation
    preserving), or ``translation``.  The returned upper bound is always
    an exact full-cloud Hausdorff distance of the returned witness.
    """
    if group not in ("isometry", "rigid", "translation"):
        raise ValueError(f"unknown transform group {group!r}")
    params = params or SearchParams()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("registration_search needs (n, dim) arrays of equal dimension")
    dim = a.shape[1]
    pair = _Pair(a, b, params)

    if tol is None:
        spread = max(np.ptp(a, axis=0).max(), np.ptp(b, axis=0).max(), 1e-12)
        tol = 1e-4 * spread

    if dim == 1:
        state = _search_line(pair, group if group == "isometry" else "translation", tol)
        final = pair.eval_full(state.o, state.c_img)
        return SearchResult(min(final, state.score), pair.to_transform(state.o, state.c_img), pair.evals, tol)

    cands: list[np.ndarray] = [np.eye(dim)]
    if group != "translation":
        cands.extend(_pca_orthos(pair.sub_a, pair.sub_b, group, dim))
        if dim == 2:
            n = max(4, params.coarse_angles)
            rots = np.stack([_rot2(t) for t in 2 * np.pi * np.arange(n) / n])
            cands.extend(rots)
            if group == "isometry":
                cands.extend(rots @ np.diag([1.0, -1.0]))
        else:
            rots = so3_grid(max(8, params.coarse_rotations))
            cands.extend(rots)
            if group == "isometry":
                cands.extend(rots @ np.diag([1.0, 1.0, -1.0]))

    orthos = np.stack(cands)
    scores = pair.coarse_scores(orthos)
    order = np.argsort(scores, kind="stable")[: max(1, params.top_k)]

    bracket0 = 2 * math.pi / max(params.coarse_angles, 4) if dim == 2 else 0.6
    best: _State | None = None
    for rank, idx in enumerate(order):
        st = _State(orthos[idx], pair.cen_a.copy(), float(scores[idx]))
        st = _refine(pair, st, group, tol, bracket0 * (1 if rank == 0 else 2))
        if best is None or st.score < best.score:
            best = st
        if best.score <= tol * 1e-6 or pair.evals >= params.budget:
            break

    # centroid alignment of the winning rotation sometimes beats box centers
    if pair.evals < params.budget:
        c_alt = pair.mean_a - (pair.mean_b - pair.cen_b) @ best.o.T
        alt = _State(best.o, c_alt)
        alt.score = pair.eval_refine(alt.o, alt.c_img)
        if alt.score < best.score:
            alt = _compass(pair, alt, tol * 8, tol)
            if alt.score < best.score:
                best = alt

    final = pair.eval_full(best.o, best.c_img)
    if pair.full_is_ref:
        final = min(final, best.score)
    return SearchResult(final, pair.to_transform(best.o, best.c_img), pair.evals, tol)
