"""Analysis frames, measurements and duality checks.

A frame is stored in the analysis convention: an ``m x k`` matrix whose rows
are the frame vectors.  Reconstruction (synthesis) operators are ``k x m``.
Frame vectors are processed in the order given; noise-shaping results depend
on that order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .errors import BadShape, DimMismatch, OddSize, RankDeficient

DUALITY_TOL = 1e-9
# recorded in metadata so a frame can be regenerated
GENERATOR = "numpy.random.Generator(PCG64).standard_normal"


@dataclass(frozen=True)
class Frame:
    matrix: np.ndarray
    label: str = ""
    seed: int | None = None
    source: str | None = None  # reproducible descriptor, e.g. "hsc:12"

    def __post_init__(self):
        mat = linalg.as_matrix(self.matrix, "frame")
        m, k = mat.shape
        if m < k:
            raise BadShape(f"frame needs m >= k, got {m}x{k}")
        s = np.linalg.svd(mat, compute_uv=False)
        if s[0] == 0.0 or s[-1] <= linalg.RANK_TOL * s[0]:
            raise RankDeficient(f"{m}x{k} matrix does not span R^{k}")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    def header(self) -> dict:
        return {
            "m": self.m,
            "k": self.k,
            "label": self.label,
            "seed": self.seed,
            "generator": GENERATOR if self.seed is not None else None,
            "source": self.source,
        }


@dataclass(frozen=True)
class DualFrame:
    matrix: np.ndarray
    of_frame: Frame = field(repr=False)

    def __post_init__(self):
        mat = linalg.as_matrix(self.matrix, "dual")
        if mat.shape != (self.of_frame.k, self.of_frame.m):
            raise DimMismatch(
                f"dual of a {self.of_frame.m}x{self.of_frame.k} frame must be "
                f"{self.of_frame.k}x{self.of_frame.m}, got {mat.shape}"
            )
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def duality_error(self) -> float:
        """max |F E - I|."""
        return duality_error(self.matrix, self.of_frame)


def gaussian_frame(m: int, k: int, seed: int) -> Frame:
    """Frame with i.i.d. standard normal entries from a seeded PCG64 stream."""
    if k < 1 or m < k:
        raise BadShape(f"gaussian frame needs m >= k >= 1, got m={m}, k={k}")
    rng = np.random.default_rng(seed)
    return Frame(
        rng.standard_normal((m, k)),
        label=f"gaussian({m},{k})",
        seed=int(seed),
        source=f"gaussian:{m},{k},{int(seed)}",
    )


def hsc_frame(m: int) -> Frame:
    """Harmonic semicircle frame: row i (1-based) is (cos(i pi/m), sin(i pi/m))."""
    if m < 2 or m % 2:
        raise OddSize(f"harmonic semicircle frame needs an even size >= 2, got {m}")
    theta = np.arange(1, m + 1) * np.pi / m
    return Frame(
        np.column_stack([np.cos(theta), np.sin(theta)]),
        label=f"hsc({m})",
        source=f"hsc:{m}",
    )


def measure(frame: Frame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != frame.k:
        raise DimMismatch(f"x has length {x.shape[0]}, frame dimension is {frame.k}")
    return frame.matrix @ x


def canonical_dual(frame: Frame) -> DualFrame:
    """The pseudoinverse of ``E``, i.e. the V-dual with ``V = I``."""
    F = linalg.least_squares_apply(frame.matrix, np.eye(frame.m))
    return DualFrame(F, frame)


def duality_error(F, frame: Frame) -> float:
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] != frame.m:
        raise DimMismatch(f"F has shape {F.shape}, frame has {frame.m} vectors")
    FE = F @ frame.matrix
    if FE.shape[0] != FE.shape[1]:
        raise DimMismatch(f"F E is {FE.shape}, not square")
    return float(np.max(np.abs(FE - np.eye(FE.shape[0]))))


def is_dual(F, frame: Frame, tol: float = DUALITY_TOL) -> bool:
    return duality_error(F, frame) <= tol


def frame_from_source(source: str) -> Frame:
    """Rebuild a frame from a descriptor.

    ``hsc:M``, ``gaussian:M,K,SEED``, ``gaussian:M,K`` (seed 0) or
    ``csv:PATH`` / a bare path to a CSV file.
    """
    kind, _, arg = source.partition(":")
    if kind == "hsc":
        return hsc_frame(int(arg))
    if kind == "gaussian":
        parts = [int(v) for v in arg.split(",")]
        if len(parts) == 2:
            parts.append(0)
        if len(parts) != 3:
            raise ValueError(f"bad gaussian frame descriptor {source!r}")
        return gaussian_frame(*parts)
    path = arg if kind == "csv" else source
    return read_frame(path)


def read_matrix_csv(path) -> np.ndarray:
    """Read a numeric CSV (no header) into a 2-D array.

    Raises ``OSError`` for unreadable files and ``ValueError`` for ragged or
    non-numeric content.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged CSV rows (widths {sorted(widths)})")
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_frame(frame: Frame, path) -> tuple[Path, Path]:
    """Write ``path`` (one frame vector per CSV row) and ``path.json`` header."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in frame.matrix:
            w.writerow([f"{v:.17g}" for v in row])
    header = path.with_name(path.name + ".json")
    header.write_text(json.dumps(frame.header(), indent=2) + "\n")
    return path, header


def read_frame(path) -> Frame:
    path = Path(path)
    mat = read_matrix_csv(path)
    header_path = path.with_name(path.name + ".json")
    label, seed = path.stem, None
    if header_path.exists():
        hdr = json.loads(header_path.read_text())
        if (hdr.get("m"), hdr.get("k")) != mat.shape:
            raise ValueError(f"{header_path}: header shape disagrees with CSV {mat.shape}")
        label = hdr.get("label") or label
        seed = hdr.get("seed")
    return Frame(mat, label=label, seed=seed, source=f"csv:{path}")


__all__ = [
    "DUALITY_TOL",
    "DualFrame",
    "Frame",
    "canonical_dual",
    "duality_error",
    "frame_from_source",
    "gaussian_frame",
    "hsc_frame",
    "is_dual",
    "measure",
    "read_frame",
    "read_matrix_csv",
    "write_frame",
]
