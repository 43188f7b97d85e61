"""File formats for hyperspectral cubes, ground-truth maps and cluster maps.

Cubes and ground truth use a JSON sidecar header next to a raw payload:

* ``<name>.json``: ``{"height": H, "width": W, "bands": B, "dtype": "f32le",
  "order": "bip"}`` (ground truth: ``"dtype": "u16le", "bands": 1``)
* ``<name>.raw``: exactly ``H*W*B*4`` bytes of little-endian float32 in
  pixel-interleaved order (all bands of pixel (0,0), then (0,1), ...), or
  ``H*W*2`` bytes of little-endian uint16 for ground truth.

Cluster maps are stored as 16-bit binary PGM (P5, maxval 65535, most
significant byte first per the netpbm convention). The in-memory sentinel
for "excluded from evaluation" is -1 and maps to 65535 on disk.

Values are stored in single precision and widened to float64 on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# On-disk sentinel for excluded pixels; in memory the sentinel is -1.
SENTINEL = -1
_SENTINEL_RAW = 65535


@dataclass
class HsiCube:
    """Dense h x w x b reflectance cube, float64 in memory."""

    height: int
    width: int
    bands: int
    values: np.ndarray  # (height, width, bands)

    def __post_init__(self):
        self.height, self.width = int(self.height), int(self.width)
        self.bands = int(self.bands)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.height, self.width, self.bands):
            raise ValueError(
                f"cube values shape {self.values.shape} does not match "
                f"({self.height}, {self.width}, {self.bands})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cube contains non-finite values")


@dataclass
class GroundTruth:
    """Per-pixel class labels; 0 means unlabeled/background, 1..C are classes."""

    height: int
    width: int
    labels: np.ndarray  # (height, width), int

    def __post_init__(self):
        self.height, self.width = int(self.height), int(self.width)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.height, self.width):
            raise ValueError(
                f"label shape {self.labels.shape} does not match "
                f"({self.height}, {self.width})"
            )
        if self.labels.min() < 0:
            raise ValueError("ground-truth labels must be non-negative")
        if self.labels.max() == 0:
            raise ValueError("ground truth has no labeled pixels (all zero)")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max())


@dataclass
class ClusterMap:
    """Per-pixel 0-based cluster ids; SENTINEL (-1) marks excluded pixels."""

    height: int
    width: int
    labels: np.ndarray  # (height, width), int

    def __post_init__(self):
        self.height, self.width = int(self.height), int(self.width)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.height, self.width):
            raise ValueError(
                f"label shape {self.labels.shape} does not match "
                f"({self.height}, {self.width})"
            )
        if self.labels.min() < SENTINEL:
            raise ValueError("cluster labels must be >= 0 or the -1 sentinel")


def _header_path(path) -> Path:
    p = Path(path)
    if p.suffix != ".json":
        p = p.with_suffix(".json")
    return p


def _read_header(path, expect_dtype: str) -> dict:
    p = _header_path(path)
    if not p.exists():
        raise ValueError(f"missing header file: {p}")
    try:
        header = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"ill-formed header {p}: {e}") from e
    for key in ("height", "width", "bands", "dtype", "order"):
        if key not in header:
            raise ValueError(f"header {p} is missing field '{key}'")
    if header["dtype"] != expect_dtype:
        raise ValueError(
            f"header {p} declares dtype '{header['dtype']}', expected '{expect_dtype}'"
        )
    if header["order"] != "bip":
        raise ValueError(f"unsupported sample order '{header['order']}' (only 'bip')")
    h, w, b = int(header["height"]), int(header["width"]), int(header["bands"])
    if h < 1 or w < 1 or b < 1:
        raise ValueError(f"header {p} declares non-positive dimensions")
    return {"height": h, "width": w, "bands": b}


def _read_payload(path, expected_bytes: int) -> bytes:
    raw = _header_path(path).with_suffix(".raw")
    if not raw.exists():
        raise ValueError(f"missing payload file: {raw}")
    data = raw.read_bytes()
    if len(data) != expected_bytes:
        raise ValueError(
            f"payload size mismatch for {raw}: got {len(data)} bytes, "
            f"header implies {expected_bytes}"
        )
    return data


def load_cube(path) -> HsiCube:
    """Load a cube from its JSON header (payload is the sibling ``.raw``)."""
    hdr = _read_header(path, "f32le")
    h, w, b = hdr["height"], hdr["width"], hdr["bands"]
    data = _read_payload(path, h * w * b * 4)
    values = np.frombuffer(data, dtype="<f4").astype(np.float64).reshape(h, w, b)
    return HsiCube(height=h, width=w, bands=b, values=values)


def save_cube(cube: HsiCube, path) -> None:
    """Write header + raw payload; values are narrowed to float32."""
    p = _header_path(path)
    header = {
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "dtype": "f32le",
        "order": "bip",
    }
    p.write_text(json.dumps(header))
    payload = cube.values.astype("<f4").tobytes()
    p.with_suffix(".raw").write_bytes(payload)


def load_ground_truth(path) -> GroundTruth:
    hdr = _read_header(path, "u16le")
    h, w = hdr["height"], hdr["width"]
    if hdr["bands"] != 1:
        raise ValueError("ground truth must declare bands=1")
    data = _read_payload(path, h * w * 2)
    labels = np.frombuffer(data, dtype="<u2").astype(np.int64).reshape(h, w)
    return GroundTruth(height=h, width=w, labels=labels)


def save_ground_truth(gt: GroundTruth, path) -> None:
    p = _header_path(path)
    header = {
        "height": gt.height,
        "width": gt.width,
        "bands": 1,
        "dtype": "u16le",
        "order": "bip",
    }
    if gt.labels.max() > 65535:
        raise ValueError("ground-truth labels exceed the uint16 range")
    p.write_text(json.dumps(header))
    p.with_suffix(".raw").write_bytes(gt.labels.astype("<u2").tobytes())


def save_cluster_map(cmap: ClusterMap, path) -> None:
    """Write a 16-bit binary PGM; the -1 sentinel is stored as 65535."""
    if cmap.labels.max() >= _SENTINEL_RAW:
        raise ValueError(
            f"cluster id {int(cmap.labels.max())} does not fit the PGM format "
            f"(ids must be < {_SENTINEL_RAW})"
        )
    stored = cmap.labels.copy()
    stored[stored == SENTINEL] = _SENTINEL_RAW
    header = f"P5\n{cmap.width} {cmap.height}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + stored.astype(">u2").tobytes())


def load_cluster_map(path) -> ClusterMap:
    data = Path(path).read_bytes()
    magic, rest = data.split(None, 1)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # Header tokens may be separated by arbitrary whitespace and # comments.
    tokens = []
    pos = 0
    while len(tokens) < 3:
        while pos < len(rest) and rest[pos : pos + 1].isspace():
            pos += 1
        if rest[pos : pos + 1] == b"#":
            while pos < len(rest) and rest[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(rest) and not rest[pos : pos + 1].isspace():
            pos += 1
        tokens.append(rest[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 65535:
        raise ValueError(f"{path}: expected maxval 65535, got {maxval}")
    payload = rest[pos:]
    if len(payload) != h * w * 2:
        raise ValueError(
            f"{path}: payload size mismatch (got {len(payload)}, expected {h * w * 2})"
        )
    labels = np.frombuffer(payload, dtype=">u2").astype(np.int64).reshape(h, w)
    labels[labels == _SENTINEL_RAW] = SENTINEL
    return ClusterMap(height=h, width=w, labels=labels)
