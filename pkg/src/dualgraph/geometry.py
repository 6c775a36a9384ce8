"""Frames, symmetry-canonical representatives, relation functions, transforms.

A frame is an origin plus a list of mutually orthogonal axis vectors whose
lengths encode half-extents. Symmetric shapes admit several equivalent frames
(a segment can point either way, a box has 48 axis labelings); canonicalize
collapses each orbit to a single representative so that relation values and
serialized output are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DegenerateFrameError, UnderConstrainedError

SYMMETRY_CLASSES = ("none", "undirected-segment", "rectangle", "box", "circle")

RELATION_FUNCTIONS = (
    "size-ratio",
    "distance-ratio",
    "angle",
    "pose",
    "parallel",
    "touch",
    "inside",
)

# Relations whose truth survives an affine view of the scene. The ratio
# relations only do so along parallel directions; the recognizer checks that
# separately before trusting them in a projected scene.
AFFINE_SAFE = {"parallel", "touch", "inside"}

_ORTHO_TOL = 1e-9


@dataclass
class Frame:
    """Oriented placement: origin plus orthogonal axes (rows), lengths = half-extents."""

    origin: np.ndarray
    axes: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.axes = np.asarray(self.axes, dtype=float)
        if self.origin.ndim != 1 or self.origin.size not in (2, 3):
            raise DegenerateFrameError(f"origin must be a 2- or 3-vector, got shape {self.origin.shape}")
        dim = self.origin.size
        if self.axes.shape != (dim, dim):
            raise DegenerateFrameError(f"axes must be {dim}x{dim}, got {self.axes.shape}")
        if not (np.isfinite(self.origin).all() and np.isfinite(self.axes).all()):
            raise DegenerateFrameError("non-finite frame")
        axes = self.axes
        lengths = np.empty(dim)
        for i in range(dim):
            lengths[i] = math.sqrt(float(axes[i] @ axes[i]))
        for i in range(dim):
            for j in range(i + 1, dim):
                dot = abs(float(axes[i] @ axes[j]))
                if dot > _ORTHO_TOL * max(lengths[i] * lengths[j], 1.0):
                    raise DegenerateFrameError(f"axes {i} and {j} are not orthogonal")
        self._lengths = lengths

    @property
    def dim(self) -> int:
        return int(self.origin.size)

    @property
    def lengths(self) -> np.ndarray:
        # cached at construction; callers treat it as read-only
        return self._lengths

    @property
    def primary_length(self) -> float:
        return float(self._lengths.max())

    @property
    def primary_axis(self) -> np.ndarray:
        return self.axes[int(np.argmax(self._lengths))]

    def copy(self) -> "Frame":
        return Frame(self.origin.copy(), self.axes.copy())

    def unit_dirs(self) -> np.ndarray:
        """Orthonormal basis aligned with the axes; zero axes get completed rows."""
        dim = self.dim
        lengths = self.lengths
        rows = []
        for i in np.argsort(-lengths):
            if lengths[i] > 0:
                rows.append(self.axes[i] / lengths[i])
        basis = list(rows)
        for cand in np.eye(dim):
            if len(basis) == dim:
                break
            v = cand.copy()
            for u in basis:
                v = v - u * (u @ v)
            n = np.linalg.norm(v)
            if n > 1e-9:
                basis.append(v / n)
        return np.array(basis)

    def corners(self) -> np.ndarray:
        """All extent corners origin +/- a_1 +/- ... (2^dim points, duplicates possible)."""
        out = []
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * self.dim)).T.reshape(-1, self.dim)
        for s in signs:
            out.append(self.origin + s @ self.axes)
        return np.array(out)

    def to_json(self) -> dict:
        return {"origin": self.origin.tolist(), "axes": self.axes.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "Frame":
        return Frame(np.asarray(obj["origin"], float), np.asarray(obj["axes"], float))


def frame_from_segment(p1, p2) -> Frame:
    """Midpoint origin, primary axis half the segment, zero cross axes."""
    p1 = np.asarray(p1, float)
    p2 = np.asarray(p2, float)
    origin = (p1 + p2) / 2.0
    half = (p2 - p1) / 2.0
    dim = origin.size
    axes = np.zeros((dim, dim))
    axes[0] = half
    return canonicalize_frame(Frame(origin, axes), "undirected-segment")


def frame_from_circle(center, radius: float) -> Frame:
    center = np.asarray(center, float)
    if radius <= 0:
        raise DegenerateFrameError("circle radius must be positive")
    return Frame(center, np.eye(center.size) * float(radius))


# -- canonicalization ---------------------------------------------------------

_REQUIRED_NONZERO = {
    "none": 1,
    "undirected-segment": 1,
    "rectangle": 2,
    "box": 3,
    "circle": 1,
}


def canonicalize_frame(f: Frame, sym: str) -> Frame:
    """Pick the orbit representative for a frame under its symmetry class.

    Axes are sorted by descending length, each axis sign is fixed so its first
    nonzero component is positive, and exact length ties break lexicographically.
    Circles collapse to radius times the identity. Idempotent.
    """
    if sym not in SYMMETRY_CLASSES:
        raise ValueError(f"unknown symmetry class: {sym}")
    lengths = f.lengths
    nonzero = int(np.count_nonzero(lengths > 0))
    need = _REQUIRED_NONZERO[sym]
    if nonzero < need:
        raise DegenerateFrameError(f"symmetry {sym} needs {need} nonzero axes, frame has {nonzero}")
    if sym == "circle":
        radii = lengths[lengths > 0]
        r = float(radii.mean())
        return Frame(f.origin.copy(), np.eye(f.dim) * r)
    if sym == "none":
        return f.copy()
    fixed = []
    for axis in f.axes:
        a = axis.copy()
        for comp in a:
            if comp != 0.0:
                if comp < 0.0:
                    a = -a
                break
        fixed.append(a)
    fixed.sort(key=lambda a: (-float(np.linalg.norm(a)), tuple(a)))
    return Frame(f.origin.copy(), np.array(fixed))


def canonical_scale(f: Frame, sym: str) -> float:
    """Primary length of the canonical representative, without building it.

    Circles average their nonzero radii; every other class takes the longest
    axis. Raises when the frame is too degenerate for its symmetry class,
    mirroring canonicalize_frame.
    """
    if sym not in SYMMETRY_CLASSES:
        raise ValueError(f"unknown symmetry class: {sym}")
    lengths = f.lengths
    count = 0
    total = 0.0
    longest = 0.0
    for k in range(lengths.size):
        lv = float(lengths[k])
        if lv > 0:
            count += 1
            total += lv
            if lv > longest:
                longest = lv
    need = _REQUIRED_NONZERO[sym]
    if count < need:
        raise DegenerateFrameError(f"symmetry {sym} needs {need} nonzero axes, frame has {count}")
    if sym == "circle":
        return total / count
    return longest


def symmetry_orbit(f: Frame, sym: str) -> list[Frame]:
    """Every equivalent representation of the frame (2 for a segment, 48 for a box)."""
    axes = f.axes
    dim = f.dim
    frames = []
    if sym == "undirected-segment":
        for s in (1.0, -1.0):
            alt = axes.copy()
            alt[0] = alt[0] * s
            frames.append(Frame(f.origin.copy(), alt))
        return frames
    if sym == "rectangle":
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                alt = axes.copy()
                alt[0] *= s1
                alt[1] *= s2
                frames.append(Frame(f.origin.copy(), alt))
        return frames
    if sym == "box":
        import itertools

        for perm in itertools.permutations(range(dim)):
            for signs in itertools.product((1.0, -1.0), repeat=dim):
                alt = np.array([axes[p] * s for p, s in zip(perm, signs)])
                frames.append(Frame(f.origin.copy(), alt))
        return frames
    if sym == "circle":
        return [canonicalize_frame(f, "circle")]
    return [f.copy()]


# -- relation functions -------------------------------------------------------


def _primary_or_raise(f: Frame, what: str) -> float:
    length = f.primary_length
    if length <= 0:
        raise DegenerateFrameError(f"{what}: zero primary axis")
    return length


def eval_relation(function: str, frames, slack: float = 0.1):
    """Evaluate one relation function on a pair of frames.

    Scalar relations return floats, `pose` a vector, boolean relations a bool.
    `slack` is only consulted by the boolean relations: radians for parallel;
    for touch and inside it is relative to the larger (resp. outer) primary
    length, which keeps the tests scale-invariant.
    """
    if function not in RELATION_FUNCTIONS:
        raise ValueError(f"unknown relation function: {function}")
    frames = list(frames)
    if len(frames) != 2:
        raise ArityError(f"{function} takes two frames, got {len(frames)}")
    a, b = frames
    if a.dim != b.dim:
        raise ArityError("frames of mixed dimension")

    if function == "size-ratio":
        return _primary_or_raise(a, "size-ratio") / _primary_or_raise(b, "size-ratio")
    if function == "distance-ratio":
        return float(np.linalg.norm(a.origin - b.origin)) / _primary_or_raise(a, "distance-ratio")
    if function == "angle":
        return angle_between(a, b)
    if function == "parallel":
        return angle_between(a, b) <= slack
    if function == "pose":
        return pose_vector(a, b)
    if function == "touch":
        scale = max(_primary_or_raise(a, "touch"), _primary_or_raise(b, "touch"))
        limit = slack * scale
        diff = b.origin - a.origin
        gap0 = math.sqrt(float(diff @ diff))
        if gap0 <= limit:
            return True  # the origins alone are close enough
        la = a.lengths
        lb = b.lengths
        reach = math.sqrt(float(la @ la)) + math.sqrt(float(lb @ lb))
        if gap0 - reach > limit:
            return False  # even the closest corners cannot span the gap
        return boundary_distance(a, b) <= limit
    if function == "inside":
        return _contains(a, b, slack * _primary_or_raise(a, "inside"))
    raise ValueError(function)


_TIE_RATIO = 0.9

_EYE_CACHE: dict = {}


def _eye(n: int) -> np.ndarray:
    e = _EYE_CACHE.get(n)
    if e is None:
        e = np.eye(n)
        _EYE_CACHE[n] = e
    return e


def near_primary_axes(f: Frame) -> list:
    """The axes whose length is within 10% of the longest.

    When several tie (squares, cubes, circles), the frame's primary
    direction is an artifact of axis ordering rather than geometry, and all
    tied axes are equally valid direction candidates.
    """
    lengths = f.lengths
    p = float(lengths.max())
    if p <= 0:
        raise DegenerateFrameError("frame has no nonzero axis")
    return [f.axes[i] for i in range(lengths.size) if lengths[i] >= _TIE_RATIO * p]


def unambiguous_axes(f: Frame, top: int = 1) -> list[int]:
    """Indices of the longest axes that tie no other axis within 10%.

    Descending length order, at most `top` entries. Tied axes carry an
    arbitrary canonical labeling, so point-correspondence fits skip them.
    """
    lengths = f.lengths
    out = []
    for i in np.argsort(-lengths):
        li = float(lengths[i])
        if li <= 0 or len(out) == top:
            break
        tied = any(
            j != i and lengths[j] > 0
            and min(li, lengths[j]) >= _TIE_RATIO * max(li, lengths[j])
            for j in range(lengths.size)
        )
        if not tied:
            out.append(int(i))
    return out


def _axis_angle(pa: np.ndarray, pb: np.ndarray) -> float:
    # atan2 of the rejection norm stays accurate near 0 where arccos loses
    # half the significant digits
    scale = math.sqrt(float(pa @ pa)) * math.sqrt(float(pb @ pb))
    dot = float(pa @ pb) / scale
    if pa.size == 2:
        cross = abs(float(pa[0] * pb[1] - pa[1] * pb[0])) / scale
    else:
        cx = float(pa[1] * pb[2] - pa[2] * pb[1])
        cy = float(pa[2] * pb[0] - pa[0] * pb[2])
        cz = float(pa[0] * pb[1] - pa[1] * pb[0])
        cross = math.sqrt(cx * cx + cy * cy + cz * cz) / scale
    return math.atan2(cross, abs(dot))


def angle_between(a: Frame, b: Frame) -> float:
    """Unsigned angle in [0, pi/2] between primary directions.

    Axes tied within 10% of the primary are direction-ambiguous, so the
    best-aligned tied pair is scored; a symmetric shape never pays for an
    arbitrary axis labeling. Unrolled scalar arithmetic: this sits inside
    every placement test a recognition run makes.
    """
    la = a.lengths
    lb = b.lengths
    pa = float(la.max())
    pb = float(lb.max())
    if pa <= 0 or pb <= 0:
        raise DegenerateFrameError("frame has no nonzero axis")
    ta = _TIE_RATIO * pa
    tb = _TIE_RATIO * pb
    dim = la.size
    best = None
    for i in range(dim):
        na = float(la[i])
        if na < ta:
            continue
        va = a.axes[i]
        a0 = float(va[0])
        a1 = float(va[1])
        a2 = float(va[2]) if dim == 3 else 0.0
        for j in range(dim):
            nb = float(lb[j])
            if nb < tb:
                continue
            vb = b.axes[j]
            b0 = float(vb[0])
            b1 = float(vb[1])
            b2 = float(vb[2]) if dim == 3 else 0.0
            scale = na * nb
            dot = (a0 * b0 + a1 * b1 + a2 * b2) / scale
            cx = a1 * b2 - a2 * b1
            cy = a2 * b0 - a0 * b2
            cz = a0 * b1 - a1 * b0
            cross = math.sqrt(cx * cx + cy * cy + cz * cz) / scale
            ang = math.atan2(cross, abs(dot))
            if best is None or ang < best:
                best = ang
    return best


def pose_vector(a: Frame, b: Frame) -> np.ndarray:
    """Relative origin of b in a's coordinates, per-axis length units.

    Zero-length axes of `a` are measured in units of its primary length.
    """
    basis = a.unit_dirs()
    lengths = np.array(sorted(a.lengths, reverse=True))
    primary = _primary_or_raise(a, "pose")
    units = np.where(lengths > 0, lengths, primary)
    rel = basis @ (b.origin - a.origin)
    return rel / units


def boundary_distance(a: Frame, b: Frame) -> float:
    """Euclidean distance between the two solid extents (0 when they overlap).

    Each extent is the affine image of the unit cube, so the nearest pair of
    points solves a small bound-constrained least-squares problem. A primal
    active-set sweep solves it exactly: walk toward the free-coordinate
    minimizer until a bound blocks, fix that coordinate, and release a bound
    only when its multiplier says the optimum lies inward. At most a handful
    of tiny linear solves, machine-precision result.
    """
    # point in a: origin_a + axes_a^T u, u in [-1,1]^dim; likewise for b
    mat = np.hstack([a.axes.T, -b.axes.T])
    rhs = b.origin - a.origin
    gram = mat.T @ mat
    mtr = mat.T @ rhs
    n = gram.shape[0]
    tr = float(np.trace(gram))
    if tr <= 0:
        return float(np.linalg.norm(rhs))
    reg = 1e-12 * tr
    kkt_tol = 1e-10 * max(1.0, tr)
    u = np.zeros(n)
    free = np.ones(n, dtype=bool)
    for _ in range(6 * n):
        idx = np.flatnonzero(free)
        if idx.size:
            if idx.size == n:
                rhs_f = mtr
                sub = gram + reg * _eye(n)
            else:
                fixed = u.copy()
                fixed[idx] = 0.0
                rhs_f = mtr[idx] - gram[idx] @ fixed
                sub = gram[np.ix_(idx, idx)] + reg * _eye(idx.size)
            try:
                v = np.linalg.solve(sub, rhs_f)
            except np.linalg.LinAlgError:
                break
            d = v - u[idx]
            if float(np.abs(d).max()) > 1e-14:
                alphas = np.full(idx.size, np.inf)
                over = v > 1.0
                under = v < -1.0
                alphas[over] = (1.0 - u[idx][over]) / d[over]
                alphas[under] = (-1.0 - u[idx][under]) / d[under]
                alpha = min(1.0, float(alphas.min()))
                u[idx] = u[idx] + alpha * d
                np.clip(u, -1.0, 1.0, out=u)
                if alpha < 1.0:
                    for k, i in enumerate(idx):
                        if alphas[k] <= alpha + 1e-15:
                            u[i] = 1.0 if d[k] > 0 else -1.0
                            free[i] = False
                    continue
        # free coordinates sit at their exact minimum; release the worst
        # bound whose multiplier pulls inward, or stop at the optimum
        g = gram @ u - mtr
        release = -1
        worst = kkt_tol
        for i in np.flatnonzero(~free):
            viol = float(g[i]) if u[i] > 0.0 else -float(g[i])
            if viol > worst:
                worst = viol
                release = i
        if release < 0:
            break
        free[release] = True
    gap = mat @ u - rhs
    return float(np.linalg.norm(gap))


def _contains(outer: Frame, inner: Frame, slack: float) -> bool:
    """Origin and axis extremes of `inner` all inside `outer`'s extent plus slack."""
    pts = [inner.origin]
    for axis in inner.axes:
        pts.append(inner.origin + axis)
        pts.append(inner.origin - axis)
    basis = outer.unit_dirs()
    lengths = np.array(sorted(outer.lengths, reverse=True))
    for p in pts:
        rel = basis @ (np.asarray(p) - outer.origin)
        if np.any(np.abs(rel) > lengths + slack):
            return False
    return True


def parallel_ratio(seg_a: Frame, seg_b: Frame, slack: float = 1e-6) -> float:
    """Length ratio of two parallel segments; affine-invariant in projection."""
    ang = angle_between(seg_a, seg_b)
    if ang > slack:
        raise DegenerateFrameError(f"segments are not parallel (angle {ang:.3g} > {slack:.3g})")
    return _primary_or_raise(seg_a, "parallel-ratio") / _primary_or_raise(seg_b, "parallel-ratio")


# -- transforms ---------------------------------------------------------------


@dataclass
class AffineMap:
    """x -> linear @ x + offset; the workhorse for template-to-world maps."""

    linear: np.ndarray
    offset: np.ndarray

    def then(self, other: "AffineMap") -> "AffineMap":
        """The composition applying `other` first, then self."""
        return AffineMap(self.linear @ other.linear, self.linear @ other.offset + self.offset)

    def apply_point(self, p) -> np.ndarray:
        return self.linear @ np.asarray(p, float) + self.offset

    def apply_frame(self, f: Frame) -> Frame:
        return Frame(self.linear @ f.origin + self.offset, f.axes @ self.linear.T)

    @staticmethod
    def identity(dim: int) -> "AffineMap":
        return AffineMap(np.eye(dim), np.zeros(dim))


def frame_onto(src: Frame, dst: Frame, src_pinv: np.ndarray | None = None) -> AffineMap:
    """The affine map carrying `src`'s frame onto `dst`'s.

    Solves linear @ src.axes.T = dst.axes.T by pseudoinverse, so each source
    axis lands exactly on its destination axis even when the frames are rank
    deficient (segments) or the aspect ratios differ (anisotropic embedding).
    Callers mapping one template onto many destinations pass the template's
    precomputed pinv(src.axes.T) to skip the repeated decomposition.
    """
    if src_pinv is None:
        src_pinv = np.linalg.pinv(src.axes.T)
    linear = dst.axes.T @ src_pinv
    offset = dst.origin - linear @ src.origin
    return AffineMap(linear, offset)


@dataclass
class SimilarityTransform:
    """x -> scale * rotation @ x + translation."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        return (self.scale * (self.rotation @ pts.T)).T + self.translation

    def apply_frame(self, f: Frame) -> Frame:
        origin = self.scale * (self.rotation @ f.origin) + self.translation
        axes = self.scale * (f.axes @ self.rotation.T)
        return Frame(origin, axes)


@dataclass
class AffineCamera:
    """3D -> 2D affine view: x -> linear @ x + translation (linear is 2x3, rank 2)."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.linear = np.asarray(self.linear, float)
        self.translation = np.asarray(self.translation, float)
        if self.linear.shape[0] != 2 or self.translation.shape != (2,):
            raise ValueError("camera must map to the plane")
        if np.linalg.matrix_rank(self.linear) < 2:
            raise DegenerateFrameError("camera linear part is rank deficient")

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        return (self.linear @ pts.T).T + self.translation


def fit_similarity(model_pts: np.ndarray, image_pts: np.ndarray):
    """Least-squares similarity (proper rotation) over point correspondences.

    Returns (SimilarityTransform, residual) where residual is the root of the
    summed squared correspondence errors. Classic SVD construction.
    """
    x = np.atleast_2d(np.asarray(model_pts, float))
    y = np.atleast_2d(np.asarray(image_pts, float))
    if x.shape != y.shape or x.shape[0] < 2:
        raise UnderConstrainedError("need at least two matching points of equal dimension")
    dim = x.shape[1]
    mx = x.mean(axis=0)
    my = y.mean(axis=0)
    xc = x - mx
    yc = y - my
    var_x = float((xc ** 2).sum()) / x.shape[0]
    if var_x < 1e-24:
        raise UnderConstrainedError("model points are coincident")
    cov = (yc.T @ xc) / x.shape[0]
    u, s, vt = np.linalg.svd(cov)
    d = np.ones(dim)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        d[-1] = -1.0
    rot = u @ np.diag(d) @ vt
    scale = float((s * d).sum()) / var_x
    if scale <= 0:
        raise UnderConstrainedError("degenerate correspondence (non-positive scale)")
    trans = my - scale * (rot @ mx)
    xform = SimilarityTransform(rot, scale, trans)
    residual = float(np.sqrt(((xform.apply_points(x) - y) ** 2).sum()))
    return xform, residual


def estimate_transform(model_pair, image_pair):
    """Similarity from two frame correspondences via the four-point system:
    each frame contributes its origin and its primary-axis endpoint.

    Returns (SimilarityTransform, residual).
    """
    m1, m2 = model_pair
    i1, i2 = image_pair
    if np.linalg.norm(m1.origin - m2.origin) < 1e-12:
        raise UnderConstrainedError("model origins coincide")
    model_pts = [m1.origin, m1.origin + m1.primary_axis, m2.origin, m2.origin + m2.primary_axis]
    image_pts = [i1.origin, i1.origin + i1.primary_axis, i2.origin, i2.origin + i2.primary_axis]
    return fit_similarity(np.array(model_pts), np.array(image_pts))


def fit_affine(model_pts: np.ndarray, image_pts: np.ndarray):
    """Minimum-norm least-squares affine map model -> image (any dims).

    Returns ((linear, translation), residual). Used for projected scenes where
    a similarity cannot explain the view.
    """
    x = np.atleast_2d(np.asarray(model_pts, float))
    y = np.atleast_2d(np.asarray(image_pts, float))
    if x.shape[0] != y.shape[0] or x.shape[0] < 2:
        raise UnderConstrainedError("need matching point lists")
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    linear = sol[:-1].T
    trans = sol[-1]
    residual = float(np.sqrt(((design @ sol - y) ** 2).sum()))
    return (linear, trans), residual


def project(camera: AffineCamera, f: Frame) -> Frame:
    """Project a 3D frame to the best-fit 2D frame of its projected extent.

    The projected axis vectors are generally not orthogonal; the result uses
    the principal directions of their outer-product sum, which reproduces the
    exact projected axes whenever they happen to stay orthogonal.
    """
    if f.dim != 3:
        raise DegenerateFrameError("project expects a 3D frame")
    origin = camera.apply_points(f.origin)[0]
    proj = (camera.linear @ f.axes.T).T
    m = np.zeros((2, 2))
    for v in proj:
        m += np.outer(v, v)
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-vals)
    axes = np.zeros((2, 2))
    for row, idx in enumerate(order):
        val = max(float(vals[idx]), 0.0)
        axes[row] = np.sqrt(val) * vecs[:, idx]
    return Frame(origin, axes)


def embed_frame(f: Frame, dim: int) -> Frame:
    """Pad a lower-dimensional frame into `dim` coordinates (extra axes zero)."""
    if f.dim == dim:
        return f.copy()
    if f.dim > dim:
        raise DegenerateFrameError(f"cannot embed a {f.dim}D frame into {dim}D")
    origin = np.zeros(dim)
    origin[: f.dim] = f.origin
    axes = np.zeros((dim, dim))
    axes[: f.dim, : f.dim] = f.axes
    return Frame(origin, axes)
