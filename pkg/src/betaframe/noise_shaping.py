"""Noise-shaping quantization.

A noise-shaping quantizer maps measurements ``y`` to alphabet values ``q``
so that ``y - q = H u`` for a lower-triangular, unit-diagonal transfer
matrix ``H`` and a bounded state ``u``.  The greedy rule rounds

    w_n = y_n + sum_{j<n} (I - H)[n, j] u_j

to the alphabet and keeps ``u_n = w_n - q_n``.  If ``||I - H||_inf + mu/delta
<= L`` and ``|y_n| <= mu`` then ``|w_n| <= L delta`` and hence ``|u_n| <= delta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import block_diag

from .errors import BadBeta, DimMismatch, InputOutOfRange, NotAdmissible

# relative slack on the stability inequality; closed-form parameters sit
# exactly on the boundary and may overshoot it by a rounding error
BOUNDARY_RTOL = 1e-12
# state excursions past delta up to this fraction of L*delta are rounding
# noise; on the stability boundary the recursion would amplify them by beta
# at every step, so they are snapped back to +-delta
STATE_SNAP_RTOL = 1e-12


class DegenerateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Alphabet:
    """``L`` equispaced levels ``-(L-1)delta, ..., (L-1)delta`` (spacing ``2 delta``)."""

    levels: int
    delta: float

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValueError(f"alphabet needs an integer L >= 2, got {self.levels}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"alphabet needs delta > 0, got {self.delta}")
        object.__setattr__(self, "levels", int(self.levels))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def values(self) -> np.ndarray:
        return alphabet_values(self)

    def round(self, w):
        return round_to(self, w)


def alphabet_values(alphabet: Alphabet) -> np.ndarray:
    L, d = alphabet.levels, alphabet.delta
    return (2.0 * np.arange(L) - (L - 1)) * d


def round_to(alphabet: Alphabet, w):
    """Nearest alphabet value; exact midpoints go to the smaller value.

    Inputs beyond the end points saturate.  Works elementwise on arrays.
    """
    L, d = alphabet.levels, alphabet.delta
    w_arr = np.asarray(w, dtype=float)
    t = (w_arr + (L - 1) * d) / (2.0 * d)
    idx = np.clip(np.ceil(t - 0.5), 0, L - 1)
    out = (2.0 * idx - (L - 1)) * d
    return float(out) if np.ndim(w) == 0 else out


def _greedy_step(alphabet: Alphabet, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = round_to(alphabet, w)
    u = w - q
    d = alphabet.delta
    over = np.abs(u) - d
    snap = (over > 0) & (over <= STATE_SNAP_RTOL * alphabet.levels * d)
    if np.any(snap):
        u = np.where(snap, np.copysign(d, u), u)
    return q, u


# -- transfer operators -------------------------------------------------------


@dataclass(frozen=True)
class Toeplitz:
    """Convolution with ``h`` (``h[0] == 1``) truncated to ``size`` samples."""

    h: tuple
    size: int

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        if not h or h[0] != 1.0:
            raise ValueError("transfer sequence must start with h[0] = 1")
        if self.size < 1:
            raise ValueError("size must be >= 1")
        object.__setattr__(self, "h", h)

    def realize(self) -> np.ndarray:
        H = np.zeros((self.size, self.size))
        for j, hj in enumerate(self.h[: self.size]):
            H += hj * np.eye(self.size, k=-j)
        return H

    def tilde_norm(self) -> float:
        return float(np.sum(np.abs(self.h)) - 1.0)

    def to_dict(self) -> dict:
        return {"kind": "toeplitz", "h": list(self.h), "size": self.size}

    def _quantize(self, alphabet, Y):
        taps = -np.asarray(self.h[1:])
        U = np.zeros_like(Y)
        Q = np.zeros_like(Y)
        for n in range(Y.shape[0]):
            w = Y[n].copy()
            for j in range(1, min(n, len(taps)) + 1):
                w += taps[j - 1] * U[n - j]
            Q[n], U[n] = _greedy_step(alphabet, w)
        return Q, U


@dataclass(frozen=True)
class BetaTransfer:
    """Bidiagonal ``H`` with 1 on the diagonal and ``-beta`` below it."""

    beta: float
    size: int

    def __post_init__(self):
        if not self.beta > 1:
            raise BadBeta(f"beta must exceed 1, got {self.beta}")
        if self.size < 1:
            raise ValueError("size must be >= 1")
        object.__setattr__(self, "beta", float(self.beta))

    def realize(self) -> np.ndarray:
        return np.eye(self.size) - self.beta * np.eye(self.size, k=-1)

    def tilde_norm(self) -> float:
        return self.beta

    def to_dict(self) -> dict:
        return {"kind": "beta", "beta": self.beta, "size": self.size}

    def _quantize(self, alphabet, Y):
        U = np.empty_like(Y)
        Q = np.empty_like(Y)
        prev = np.zeros(Y.shape[1:])
        for n in range(Y.shape[0]):
            Q[n], U[n] = _greedy_step(alphabet, Y[n] + self.beta * prev)
            prev = U[n]
        return Q, U


@dataclass(frozen=True)
class BlockDiagonal:
    blocks: tuple

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("block diagonal operator needs at least one block")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def size(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def offsets(self) -> np.ndarray:
        return np.cumsum([0] + [b.size for b in self.blocks])

    def realize(self) -> np.ndarray:
        return block_diag(*(b.realize() for b in self.blocks))

    def tilde_norm(self) -> float:
        return max(b.tilde_norm() for b in self.blocks)

    def to_dict(self) -> dict:
        return {"kind": "block_diagonal", "blocks": [b.to_dict() for b in self.blocks]}

    def _quantize(self, alphabet, Y):
        # blocks never share state, so each one starts from u = 0
        Q = np.empty_like(Y)
        U = np.empty_like(Y)
        off = self.offsets
        for b, lo, hi in zip(self.blocks, off[:-1], off[1:]):
            Q[lo:hi], U[lo:hi] = b._quantize(alphabet, Y[lo:hi])
        return Q, U


TransferOperator = Union[Toeplitz, BetaTransfer, BlockDiagonal]


def beta_blocks(beta, sizes) -> BlockDiagonal:
    """Block-diagonal operator of beta blocks; ``beta`` is a scalar or per-block list."""
    betas = np.broadcast_to(np.asarray(beta, dtype=float), (len(sizes),))
    return BlockDiagonal(tuple(BetaTransfer(float(b), int(n)) for b, n in zip(betas, sizes)))


def transfer_from_dict(d: dict) -> TransferOperator:
    kind = d["kind"]
    if kind == "toeplitz":
        return Toeplitz(tuple(d["h"]), int(d["size"]))
    if kind == "beta":
        return BetaTransfer(float(d["beta"]), int(d["size"]))
    if kind == "block_diagonal":
        return BlockDiagonal(tuple(transfer_from_dict(b) for b in d["blocks"]))
    raise ValueError(f"unknown transfer operator kind {kind!r}")


def realize(op: TransferOperator) -> np.ndarray:
    return op.realize()


def tilde_norm(op: TransferOperator) -> float:
    """``||I - H||_{inf->inf}``, from the structure rather than the matrix."""
    return op.tilde_norm()


def admissible(beta: float, delta: float, mu: float, L: int) -> bool:
    """Membership of ``(beta, delta)`` in the beta stability region for ``(mu, L)``."""
    return beta > 1 and stable(beta, delta, mu, L)


def stable(tilde: float, delta: float, mu: float, L: int) -> bool:
    """General greedy stability condition ``tilde + mu/delta <= L``."""
    if not delta > 0 or mu < 0:
        return False
    return tilde + mu / delta <= L * (1.0 + BOUNDARY_RTOL)


# -- quantization ---------------------------------------------------------------


@dataclass(frozen=True)
class QuantizationRecord:
    y: np.ndarray
    q: np.ndarray
    u: np.ndarray
    alphabet: Alphabet
    transfer: TransferOperator

    def residual(self) -> float:
        """``||y - q - H u||_inf``."""
        return float(np.max(np.abs(self.y - self.q - self.transfer.realize() @ self.u)))

    def to_dict(self) -> dict:
        return {
            "y": [float(v) for v in self.y],
            "q": [float(v) for v in self.q],
            "u": [float(v) for v in self.u],
            "L": self.alphabet.levels,
            "delta": self.alphabet.delta,
            "transfer": self.transfer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizationRecord":
        return cls(
            y=np.asarray(d["y"], dtype=float),
            q=np.asarray(d["q"], dtype=float),
            u=np.asarray(d["u"], dtype=float),
            alphabet=Alphabet(int(d["L"]), float(d["delta"])),
            transfer=transfer_from_dict(d["transfer"]),
        )


def check_stability(op: TransferOperator, alphabet: Alphabet, mu: float) -> None:
    t = op.tilde_norm()
    if not stable(t, alphabet.delta, mu, alphabet.levels):
        raise NotAdmissible(
            f"stability condition fails: ||I-H|| + mu/delta = "
            f"{t} + {mu}/{alphabet.delta} = {t + mu / alphabet.delta:.6g} > L = "
            f"{alphabet.levels} (outside S_mu,L)"
        )
    if mu == 0:
        warnings.warn("mu = 0: only the zero vector is admissible", DegenerateWarning)


def quantize_columns(op: TransferOperator, alphabet: Alphabet, Y) -> tuple[np.ndarray, np.ndarray]:
    """Greedy-quantize each column of ``Y`` (``m x n``); returns ``(Q, U)``.

    No precondition checks; callers are expected to have validated the
    stability condition and the input range.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != op.size:
        raise DimMismatch(f"input has {Y.shape[0]} rows, transfer operator is {op.size}")
    return op._quantize(alphabet, Y)


def greedy_quantize(op: TransferOperator, alphabet: Alphabet, y, mu: float) -> QuantizationRecord:
    """Greedy noise-shaping quantization of a single measurement vector.

    Raises
    ------
    NotAdmissible
        If ``tilde_norm(op) + mu/delta > L``.
    InputOutOfRange
        If ``max |y| > mu``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimMismatch("y must be a vector")
    check_stability(op, alphabet, mu)
    peak = float(np.max(np.abs(y))) if y.size else 0.0
    if peak > mu * (1.0 + BOUNDARY_RTOL):
        raise InputOutOfRange(f"max |y| = {peak:.6g} exceeds mu = {mu:.6g}")
    q, u = quantize_columns(op, alphabet, y[:, None])
    return QuantizationRecord(y.copy(), q[:, 0], u[:, 0], alphabet, op)
