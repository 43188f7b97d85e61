"""Convert arrays stored in MATLAB containers to the slcgc raw format.

A container is a ``.mat`` file holding named arrays.  Classic containers
(v7 and earlier) are read with :func:`scipy.io.loadmat` and expose arrays
with their logical MATLAB shape.  Newer v7.3 containers are HDF5 files;
those are read with ``h5py``, which exposes each array with its axes
reversed relative to the MATLAB shape, so the default axis policy
transposes them back.

Conversion writes the slcgc on-disk pair (a JSON header plus a ``.raw``
payload) through the public :mod:`slcgc` save functions, so the output is
always readable by the clustering pipeline.  Verification re-reads both
sides and compares element by element.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io

from slcgc import (
    GroundTruth,
    HsiCube,
    load_cube,
    load_ground_truth,
    save_cube,
    save_ground_truth,
)

AXIS_POLICIES = ("auto", "keep", "reverse")
MAX_LABEL = 65535


class ConversionError(ValueError):
    """Raised when a container cannot be converted or fails verification."""


@dataclass
class ConversionSpec:
    """One conversion job: which array to pull and where to write it.

    ``out_base`` is a path without extension; the header lands at
    ``out_base + '.json'`` and the payload at ``out_base + '.raw'``.
    ``axes='auto'`` reverses the axis order for HDF5 containers and keeps
    it for classic ones; ``'keep'`` and ``'reverse'`` force either choice.
    """

    container: str
    variable: str
    out_base: str
    ground_truth: bool = False
    axes: str = "auto"

    def __post_init__(self) -> None:
        if self.axes not in AXIS_POLICIES:
            raise ValueError(
                f"axes must be one of {AXIS_POLICIES}, got {self.axes!r}"
            )


@dataclass
class VerifyReport:
    """Outcome of a successful verification pass."""

    shape: tuple[int, ...]
    elements: int
    ground_truth: bool
    label_counts: dict[int, int] = field(default_factory=dict)

    def describe(self) -> str:
        dims = "x".join(str(s) for s in self.shape)
        kind = "ground truth" if self.ground_truth else "cube"
        lines = [f"verified {kind} {dims}: {self.elements} elements match"]
        for label in sorted(self.label_counts):
            lines.append(f"  label {label}: {self.label_counts[label]} pixels")
        return "\n".join(lines)


def read_container(path) -> tuple[dict[str, np.ndarray], str]:
    """Load every named array from a container.

    Returns the arrays keyed by variable name together with the container
    kind, ``"classic"`` or ``"hdf5"``.  Metadata entries (``__header__``
    and friends, HDF5 reference tables) are dropped.
    """
    p = Path(path)
    if not p.exists():
        raise ConversionError(f"container not found: {p}")
    try:
        raw = scipy.io.loadmat(p)
    except NotImplementedError:
        # MATLAB v7.3: an HDF5 file behind a MAT version header.
        return _read_hdf5(p), "hdf5"
    except (ValueError, OSError, IndexError) as parse_error:
        # Not a classic container; it may still be a bare HDF5 file.
        try:
            return _read_hdf5(p), "hdf5"
        except (ConversionError, OSError):
            raise ConversionError(
                f"cannot read container {p}: not a MAT or HDF5 file"
            ) from parse_error
    arrays = {
        name: np.asarray(value)
        for name, value in raw.items()
        if not name.startswith("__")
    }
    return arrays, "classic"


def _read_hdf5(path: Path) -> dict[str, np.ndarray]:
    try:
        import h5py
    except ImportError as e:
        raise ConversionError(
            f"{path} is a v7.3 container; install the hdf5 extra to read it"
        ) from e
    arrays: dict[str, np.ndarray] = {}
    with h5py.File(path, "r") as handle:
        for name, node in handle.items():
            if name == "#refs#" or not hasattr(node, "shape"):
                continue
            arrays[name] = np.asarray(node)
    return arrays


def _take_variable(spec: ConversionSpec) -> np.ndarray:
    arrays, kind = read_container(spec.container)
    if spec.variable not in arrays:
        available = ", ".join(sorted(arrays)) or "none"
        raise ConversionError(
            f"variable {spec.variable!r} not found in {spec.container}; "
            f"available: {available}"
        )
    values = arrays[spec.variable]
    reverse = spec.axes == "reverse" or (spec.axes == "auto" and kind == "hdf5")
    if reverse:
        values = np.transpose(values)
    return values


def _as_cube(values: np.ndarray, name: str) -> HsiCube:
    if values.ndim != 3:
        raise ConversionError(
            f"variable {name!r} must be a 3-D cube, got {values.ndim} axes "
            f"with shape {values.shape}"
        )
    values = values.astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise ConversionError(f"variable {name!r} contains non-finite values")
    h, w, b = values.shape
    return HsiCube(height=h, width=w, bands=b, values=values)


def _as_ground_truth(values: np.ndarray, name: str) -> GroundTruth:
    if values.ndim != 2:
        raise ConversionError(
            f"variable {name!r} must be a 2-D label map, got {values.ndim} "
            f"axes with shape {values.shape}"
        )
    values = np.asarray(values)
    if not np.all(np.isfinite(values.astype(np.float64))):
        raise ConversionError(f"variable {name!r} contains non-finite labels")
    labels = np.asarray(values, dtype=np.float64)
    rounded = np.round(labels)
    if np.any(np.abs(labels - rounded) > 0):
        raise ConversionError(f"variable {name!r} contains non-integral labels")
    if np.any(rounded < 0):
        raise ConversionError(f"variable {name!r} contains negative labels")
    if np.any(rounded > MAX_LABEL):
        raise ConversionError(
            f"variable {name!r} contains labels above {MAX_LABEL}"
        )
    h, w = values.shape
    return GroundTruth(height=h, width=w, labels=rounded.astype(np.int64))


def convert(spec: ConversionSpec) -> tuple[Path, Path]:
    """Extract one array and write it as a header/payload pair.

    Cubes are narrowed to float32 on disk, the pipeline's native
    precision.  Returns the header and payload paths.
    """
    values = _take_variable(spec)
    base = Path(spec.out_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    if spec.ground_truth:
        save_ground_truth(_as_ground_truth(values, spec.variable), base)
    else:
        save_cube(_as_cube(values, spec.variable), base)
    header = base if base.suffix == ".json" else base.with_suffix(".json")
    return header, header.with_suffix(".raw")


def verify(spec: ConversionSpec) -> VerifyReport:
    """Check a converted pair against its source container.

    Re-reads the container with the same axis policy, loads the converted
    files through the slcgc readers, and compares every element.  Cube
    values are compared after narrowing the source to float32, which is
    exactly what conversion stores.  Raises :class:`ConversionError` on
    the first difference, naming the flat element index.
    """
    source = _take_variable(spec)
    if spec.ground_truth:
        expected = _as_ground_truth(source, spec.variable).labels
        actual = load_ground_truth(spec.out_base).labels
        kind = "label"
    else:
        expected = (
            _as_cube(source, spec.variable)
            .values.astype("<f4")
            .astype(np.float64)
        )
        actual = load_cube(spec.out_base).values
        kind = "value"
    if actual.shape != expected.shape:
        raise ConversionError(
            f"dimensions differ: converted file has shape {actual.shape}, "
            f"container variable has shape {expected.shape}"
        )
    mismatch = actual != expected
    if np.any(mismatch):
        flat = int(np.flatnonzero(mismatch.ravel())[0])
        coords = tuple(int(c) for c in np.unravel_index(flat, actual.shape))
        raise ConversionError(
            f"{kind} mismatch at flat index {flat} (position {coords}): "
            f"converted {actual.ravel()[flat]!r} != "
            f"container {expected.ravel()[flat]!r}"
        )
    counts: dict[int, int] = {}
    if spec.ground_truth:
        labels, tally = np.unique(expected, return_counts=True)
        counts = {int(l): int(c) for l, c in zip(labels, tally)}
    return VerifyReport(
        shape=tuple(expected.shape),
        elements=int(expected.size),
        ground_truth=spec.ground_truth,
        label_counts=counts,
    )
