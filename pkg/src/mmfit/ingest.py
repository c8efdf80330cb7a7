"""Dataset ingestion: correspondence CSV files and RGB-D grid files.

Formats are deliberately plain so fixtures stay diffable and bit-exact:

- Correspondence CSV: first line ``# width height``, then
  ``u1x,u1y,u2x,u2y,label`` per row (label -1 = outlier), UTF-8, LF.
- Depth grid: PGM-style ``P2`` (ASCII) or ``P5`` (binary, 16-bit big-endian)
  with a required ``# scale <meters-per-unit>`` comment in the header;
  stored value 0 marks invalid depth.
- Intensity: plain 8-bit PGM (``P2``/``P5``), loaded as floats in [0, 1].
- Label grid: first line ``# width height``, then one row of integers per
  image row (-1 = outlier).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    MissingHeader,
    NoLabels,
    ParseError,
)
from .geometry import CorrespondenceSet, fit_plane, plane_costs
from .seeding import seed_tuple


@dataclass
class RgbdFrame:
    """Inverse depth, intensity in [0, 1], optional instance labels."""

    xi: np.ndarray
    intensity: np.ndarray
    instance_labels: np.ndarray = None


def _parse_size_header(line, path):
    parts = line.strip().split()
    if len(parts) != 3 or parts[0] != "#":
        raise MissingHeader(f"{path}: expected '# width height' header line")
    try:
        w, h = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise MissingHeader(f"{path}: malformed size header {line!r}") from exc
    if w < 0 or h < 0:
        raise MissingHeader(f"{path}: negative image size in header")
    return w, h


def load_correspondences(path):
    """Read a correspondence CSV.

    Returns (CorrespondenceSet, gt_labels, (width, height)). Any malformed
    or non-finite row aborts with ParseError carrying its line number.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MissingHeader(f"{path}: empty file")
    w, h = _parse_size_header(lines[0], path)

    u1, u2, labels = [], [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", line=lineno)
        try:
            vals = [float(p) for p in parts[:4]]
            lab = int(parts[4])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if not all(np.isfinite(v) for v in vals):
            raise ParseError("non-finite coordinate", line=lineno)
        if lab < -1:
            raise ParseError(f"label {lab} below -1", line=lineno)
        u1.append(vals[:2])
        u2.append(vals[2:])
        labels.append(lab)
    cs = CorrespondenceSet(
        np.asarray(u1, dtype=float).reshape(-1, 2),
        np.asarray(u2, dtype=float).reshape(-1, 2),
    )
    return cs, np.asarray(labels, dtype=np.int64), (w, h)


def save_correspondences(path, cs: CorrespondenceSet, labels, image_size):
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(cs):
        raise ValueError("labels length mismatch")
    w, h = image_size
    rows = [f"# {int(w)} {int(h)}"]
    for (x1, y1), (x2, y2), lab in zip(cs.u1, cs.u2, labels):
        rows.append(f"{x1!r},{y1!r},{x2!r},{y2!r},{int(lab)}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def _read_pgm_tokens(data, path, need_scale):
    """Split a PGM header into (magic, width, height, maxval, scale, offset)."""
    # Tokenize byte-by-byte so the offset of binary payloads stays exact.
    pos = 0
    tokens = []
    scale = None
    while len(tokens) < 4 and pos < len(data):
        ch = data[pos : pos + 1]
        if ch == b"#":
            eol = data.find(b"\n", pos)
            eol = len(data) if eol < 0 else eol
            comment = data[pos:eol].decode("ascii", "replace").strip()
            fields = comment[1:].split()
            if len(fields) == 2 and fields[0] == "scale":
                try:
                    scale = float(fields[1])
                except ValueError as exc:
                    raise MissingHeader(f"{path}: bad scale comment") from exc
            pos = eol + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end].decode("ascii", "replace"))
            pos = end
    if len(tokens) < 4:
        raise MissingHeader(f"{path}: truncated PGM header")
    magic = tokens[0]
    if magic not in ("P2", "P5"):
        raise ParseError(f"{path}: unsupported magic {magic!r}")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ParseError(f"{path}: malformed PGM dimensions") from exc
    if need_scale and scale is None:
        raise MissingHeader(f"{path}: depth grids need a '# scale <m>' comment")
    if need_scale and scale is not None and scale <= 0:
        raise ParseError(f"{path}: scale must be positive")
    return magic, width, height, maxval, scale, pos + 1


def _load_pgm(path, need_scale):
    path = Path(path)
    data = path.read_bytes()
    magic, width, height, maxval, scale, offset = _read_pgm_tokens(
        data, path, need_scale
    )
    count = width * height
    if magic == "P2":
        body = data[offset - 1 :].decode("ascii", "replace")
        vals = []
        for tok in body.split():
            if tok.startswith("#"):
                continue
            try:
                vals.append(int(tok))
            except ValueError as exc:
                raise ParseError(f"{path}: non-integer pixel {tok!r}") from exc
        if len(vals) != count:
            raise ParseError(f"{path}: expected {count} pixels, got {len(vals)}")
        grid = np.asarray(vals, dtype=np.int64).reshape(height, width)
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        payload = data[offset : offset + need]
        if len(payload) != need:
            raise ParseError(f"{path}: binary payload truncated")
        grid = (
            np.frombuffer(payload, dtype=dtype).astype(np.int64).reshape(height, width)
        )
    if grid.min(initial=0) < 0 or grid.max(initial=0) > maxval:
        raise ParseError(f"{path}: pixel values exceed maxval")
    return grid, maxval, scale


def load_depth_grid(path):
    """Depth grid file to (depth_meters (H, W), scale). 0 stays 0 (invalid)."""
    grid, _, scale = _load_pgm(path, need_scale=True)
    return grid.astype(float) * scale, scale


def save_depth_grid(path, depth_m, scale=0.001, binary=False):
    depth_m = np.asarray(depth_m, dtype=float)
    if not np.isfinite(depth_m).all() or (depth_m < 0).any():
        raise ValueError("depth must be finite and nonnegative")
    vals = np.round(depth_m / scale).astype(np.int64)
    maxval = 65535
    if (vals > maxval).any():
        raise ValueError("depth exceeds the 16-bit range at this scale")
    h, w = depth_m.shape
    header = f"P5\n# scale {scale!r}\n{w} {h}\n{maxval}\n" if binary else (
        f"P2\n# scale {scale!r}\n{w} {h}\n{maxval}\n"
    )
    path = Path(path)
    if binary:
        path.write_bytes(header.encode("ascii") + vals.astype(">u2").tobytes())
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in vals)
        path.write_text(header + body + "\n", encoding="ascii")


def load_intensity(path):
    """8-bit PGM to float intensity in [0, 1]."""
    grid, maxval, _ = _load_pgm(path, need_scale=False)
    if maxval < 1:
        raise ParseError(f"{path}: maxval must be >= 1")
    return grid.astype(float) / maxval


def save_intensity(path, intensity, binary=False):
    intensity = np.asarray(intensity, dtype=float)
    if (intensity < -1e-9).any() or (intensity > 1 + 1e-9).any():
        raise ValueError("intensity must lie in [0, 1]")
    vals = np.clip(np.round(intensity * 255), 0, 255).astype(np.int64)
    h, w = intensity.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n255\n"
    path = Path(path)
    if binary:
        path.write_bytes(header.encode("ascii") + vals.astype("u1").tobytes())
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in vals)
        path.write_text(header + body + "\n", encoding="ascii")


def load_label_grid(path):
    """Integer label grid with a '# width height' header; -1 = outlier."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MissingHeader(f"{path}: empty file")
    w, h = _parse_size_header(lines[0], path)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            row = [int(tok) for tok in raw.split()]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if len(row) != w:
            raise ParseError(f"expected {w} labels, got {len(row)}", line=lineno)
        rows.append(row)
    if len(rows) != h:
        raise ParseError(f"{path}: expected {h} rows, got {len(rows)}")
    return np.asarray(rows, dtype=np.int64).reshape(h, w)


def save_label_grid(path, labels):
    labels = np.asarray(labels, dtype=np.int64)
    h, w = labels.shape
    rows = [f"# {w} {h}"]
    rows.extend(" ".join(str(v) for v in row) for row in labels)
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def load_rgbd(depth_path, image_path, labels_path=None) -> RgbdFrame:
    """Load a frame and convert depth to inverse depth (0 = invalid)."""
    depth, _ = load_depth_grid(depth_path)
    intensity = load_intensity(image_path)
    if depth.shape != intensity.shape:
        raise DimensionMismatch(
            f"depth {depth.shape} vs intensity {intensity.shape}"
        )
    labels = None
    if labels_path is not None:
        labels = load_label_grid(labels_path)
        if labels.shape != depth.shape:
            raise DimensionMismatch(f"labels {labels.shape} vs depth {depth.shape}")
    with np.errstate(divide="ignore"):
        xi = np.where(depth > 0, 1.0 / np.where(depth > 0, depth, 1.0), 0.0)
    return RgbdFrame(xi=xi, intensity=intensity, instance_labels=labels)


def _consensus_plane(coords, xi, rng, trials, inlier_threshold, sigma_xi):
    """Minimal-sample consensus plane over one instance's pixels."""
    n = len(xi)
    best_inliers = None
    for _ in range(trials):
        idx = np.sort(rng.choice(n, size=3, replace=False))
        try:
            plane = fit_plane(coords[idx], xi[idx])
        except DegenerateSample:
            continue
        costs = plane_costs(coords, xi, plane, sigma_xi)
        inliers = np.flatnonzero(costs <= inlier_threshold)
        if best_inliers is None or len(inliers) > len(best_inliers):
            best_inliers = inliers
    if best_inliers is None or len(best_inliers) < 3:
        return None, np.empty(0, dtype=np.int64)
    try:
        plane = fit_plane(coords[best_inliers], xi[best_inliers])
        costs = plane_costs(coords, xi, plane, sigma_xi)
        refined = np.flatnonzero(costs <= inlier_threshold)
        if len(refined) >= 3:
            return plane, refined
        return plane, best_inliers
    except DegenerateSample:
        return None, np.empty(0, dtype=np.int64)


def build_nyu_ground_truth(
    frame: RgbdFrame,
    min_inliers=500,
    merge_tol=0.05,
    seed=0,
    sigma_xi=0.005,
    inlier_threshold=3.84,
    trials=50,
):
    """Per-pixel ground-truth plane labels from instance annotations.

    Each instance gets a consensus plane fit on its valid-depth pixels;
    instances whose plane supports fewer than min_inliers pixels become
    outliers. Planes within merge_tol relative parameter distance share one
    label. Returns an (H, W) int grid, -1 = outlier.
    """
    if frame.instance_labels is None:
        raise NoLabels("frame has no instance labels")
    h, w = frame.xi.shape
    ys, xs = np.divmod(np.arange(h * w), w)
    coords = np.column_stack([xs, ys]).astype(float)
    xi = frame.xi.ravel()
    inst = frame.instance_labels.ravel()
    valid = np.isfinite(xi) & (xi > 0)

    planes = []
    pixel_sets = []
    for k, inst_id in enumerate(np.unique(inst[inst >= 0])):
        members = np.flatnonzero((inst == inst_id) & valid)
        if len(members) < max(3, 1):
            continue
        rng = np.random.default_rng(seed_tuple(seed, k))
        plane, rel_inliers = _consensus_plane(
            coords[members], xi[members], rng, trials, inlier_threshold, sigma_xi
        )
        if plane is None or len(rel_inliers) < min_inliers:
            continue
        planes.append(plane)
        pixel_sets.append(members[rel_inliers])

    # Union-find merge of planes with near-identical parameters.
    diag = float(np.hypot(w, h))
    parent = list(range(len(planes)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def rel_distance(p, q):
        pa = np.concatenate([p.w * diag, [p.c]])
        qa = np.concatenate([q.w * diag, [q.c]])
        denom = max(np.linalg.norm(pa), np.linalg.norm(qa), 1e-12)
        return float(np.linalg.norm(pa - qa)) / denom

    for i in range(len(planes)):
        for j in range(i + 1, len(planes)):
            if rel_distance(planes[i], planes[j]) < merge_tol:
                parent[find(j)] = find(i)

    roots = sorted({find(i) for i in range(len(planes))})
    root_label = {r: li for li, r in enumerate(roots)}
    out = np.full(h * w, -1, dtype=np.int64)
    for i, pixels in enumerate(pixel_sets):
        out[pixels] = root_label[find(i)]
    return out.reshape(h, w)
