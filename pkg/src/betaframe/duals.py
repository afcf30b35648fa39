"""V-duals and beta duals.

For a ``p x m`` condensation matrix ``V`` with ``VE`` of rank ``k`` the
V-dual ``F_V = pinv(VE) V`` is a left inverse of ``E``.  Beta duals use a
block-diagonal ``V`` whose ``i``-th block is the single row
``[b^-1, b^-2, ..., b^-m_i]``, matched with beta transfer blocks.  Since
``v_i H_i = [0, ..., 0, b^-m_i]`` the reconstruction error only sees the last
state of each block:

    ||x - F_V q||_2 <= delta sqrt(l) b_*^(-m_*) / sigma_min(VE).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    AlphaTooSmall,
    BadBeta,
    BadShape,
    DimMismatch,
    InputOutOfRange,
    NotAdmissible,
    OddSize,
    RankDeficient,
)
from .frames import DUALITY_TOL, DualFrame, Frame, frame_from_source
from .noise_shaping import (
    BOUNDARY_RTOL,
    Alphabet,
    BlockDiagonal,
    QuantizationRecord,
    admissible,
    beta_blocks,
    greedy_quantize,
    quantize_columns,
)

BALANCED = "balanced"
TRUNCATE = "truncate"
MU_POLICIES = ("exact", "gaussian")


@dataclass(frozen=True)
class BlockPartition:
    m: int
    sizes: tuple
    mode: str

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.sizes)

    @property
    def used(self) -> int:
        """Number of leading frame vectors covered by the blocks."""
        return int(sum(self.sizes))

    @property
    def m_star(self) -> int:
        return int(min(self.sizes))

    @property
    def offsets(self) -> np.ndarray:
        return np.cumsum((0,) + tuple(self.sizes))

    def to_dict(self) -> dict:
        return {"m": self.m, "sizes": list(self.sizes), "mode": self.mode}


def make_partition(m: int, l: int, mode: str = BALANCED) -> BlockPartition:
    """Split ``m`` ordered rows into ``l`` consecutive blocks.

    ``balanced`` uses all rows, sizes differ by at most one and the first
    ``m % l`` blocks are the larger ones.  ``truncate`` makes ``l`` blocks of
    ``m // l`` rows and drops the trailing ``m - l*(m//l)`` rows.
    """
    if not 1 <= l <= m:
        raise BadShape(f"need 1 <= l <= m, got l={l}, m={m}")
    base, extra = divmod(m, l)
    if mode == BALANCED:
        sizes = tuple(base + 1 if i < extra else base for i in range(l))
    elif mode == TRUNCATE:
        sizes = (base,) * l
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    return BlockPartition(int(m), sizes, mode)


@dataclass(frozen=True)
class CondensationMap:
    partition: BlockPartition
    betas: tuple
    matrix: np.ndarray = field(repr=False)

    @property
    def beta_star(self) -> float:
        return min(self.betas)

    def padded(self) -> np.ndarray:
        """``l x m`` version with zero columns for rows dropped by truncation."""
        p = self.partition
        out = np.zeros((p.l, p.m))
        out[:, : p.used] = self.matrix
        return out


def beta_condensation(partition: BlockPartition, beta) -> CondensationMap:
    """Block-diagonal ``l x used`` matrix with rows ``[b_i^-1, ..., b_i^-m_i]``."""
    betas = tuple(float(b) for b in np.broadcast_to(np.asarray(beta, dtype=float), (partition.l,)))
    if any(not b > 1 for b in betas):
        raise BadBeta(f"all betas must exceed 1, got {betas}")
    V = np.zeros((partition.l, partition.used))
    off = partition.offsets
    for i, b in enumerate(betas):
        n = partition.sizes[i]
        V[i, off[i] : off[i + 1]] = b ** -np.arange(1.0, n + 1)
    V.setflags(write=False)
    return CondensationMap(partition, betas, V)


def v_dual(frame: Frame, V) -> DualFrame:
    """The dual ``pinv(VE) V``; raises ``RankDeficient`` if ``VE`` has rank < k."""
    V = linalg.as_matrix(V, "V")
    if V.shape[1] != frame.m:
        raise DimMismatch(f"V has {V.shape[1]} columns, frame has {frame.m} vectors")
    try:
        F = linalg.least_squares_apply(V @ frame.matrix, V)
    except RankDeficient as exc:
        raise RankDeficient(f"condensation VE is not a frame: {exc}") from None
    return DualFrame(F, frame)


def optimal_params(alpha: float, mu: float, L: int) -> tuple[float, float, float]:
    """Minimize ``delta * beta**-alpha`` over ``beta + mu/delta <= L``.

    The minimizer lies on the boundary, at ``beta = L alpha/(1+alpha)`` and
    ``delta = mu (1+alpha)/L``, with minimum ``mu alpha ((1+alpha)/(alpha L))**(1+alpha)``.
    Needs ``alpha > 1/(L-1)`` so that ``beta > 1``.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    if not alpha > 1.0 / (L - 1):
        raise AlphaTooSmall(f"alpha = {alpha} must exceed 1/(L-1) = {1.0 / (L - 1):.6g}")
    beta = L * alpha / (1.0 + alpha)
    delta = mu * (1.0 + alpha) / L
    value = mu * alpha * ((1.0 + alpha) / (alpha * L)) ** (1.0 + alpha)
    return beta, delta, value


def resolve_mu(frame: Frame, policy) -> float:
    """``exact`` -> ``||E||_{2->inf}``; ``gaussian`` -> ``4 sqrt(m)``; a number is used as is."""
    if policy == "exact":
        return linalg.norm_2_inf(frame.matrix)
    if policy == "gaussian":
        return 4.0 * math.sqrt(frame.m)
    return float(policy)


@dataclass(frozen=True)
class BetaDualScheme:
    frame: Frame
    condensation: CondensationMap
    alphabet: Alphabet
    transfer: BlockDiagonal
    dual: DualFrame
    mu: float
    mu_policy: str = "exact"
    eta: float = 0.0
    stable: bool = True

    @property
    def partition(self) -> BlockPartition:
        return self.condensation.partition

    @property
    def beta(self) -> float:
        return self.condensation.beta_star

    @property
    def delta(self) -> float:
        return self.alphabet.delta

    @property
    def L(self) -> int:
        return self.alphabet.levels

    @property
    def l(self) -> int:  # noqa: E743
        return self.partition.l

    def condensed(self) -> np.ndarray:
        """The ``l x k`` matrix ``V E`` (on the retained rows)."""
        return self.condensation.matrix @ self.frame.matrix[: self.partition.used]

    def encode(self, x) -> QuantizationRecord:
        return encode(self, x)

    def decode(self, q) -> np.ndarray:
        return decode(self, q)

    def error_bound(self) -> float:
        return error_bound(self)

    def to_dict(self) -> dict:
        return {
            "frame": self.frame.header(),
            "partition": self.partition.to_dict(),
            "betas": list(self.condensation.betas),
            "delta": self.delta,
            "L": self.L,
            "mu": self.mu,
            "mu_policy": self.mu_policy,
            "eta": self.eta,
            "stable": self.stable,
        }


def build_scheme(
    frame: Frame,
    l: int,
    L: int,
    mode: str = BALANCED,
    eta: float = 0.0,
    mu_policy="exact",
    beta=None,
    delta: float | None = None,
) -> BetaDualScheme:
    """Assemble a beta-dual quantization scheme for ``frame``.

    By default ``(beta, delta)`` come from :func:`optimal_params` with
    ``alpha = (1 - eta) * (m // l)``.  Supplying ``beta`` alone pins ``delta``
    to the stability boundary ``mu / (L - beta)``; supplying both uses them as
    given (and they must be admissible).
    """
    m, k = frame.m, frame.k
    if not k <= l <= m:
        raise BadShape(f"need k <= l <= m, got k={k}, l={l}, m={m}")
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    partition = make_partition(m, l, mode)
    mu = resolve_mu(frame, mu_policy)
    if beta is None:
        beta, delta, _ = optimal_params((1.0 - eta) * (m // l), mu, L)
    elif delta is None:
        b_star = float(np.min(beta))
        if not 1 < b_star < L:
            raise NotAdmissible(f"beta = {b_star} must lie in (1, L) for a stable delta")
        delta = mu / (L - float(np.max(beta)))
    b_max = float(np.max(beta))
    if not (float(np.min(beta)) > 1 and admissible(b_max, delta, mu, L)):
        raise NotAdmissible(
            f"(beta, delta) = ({b_max:.6g}, {delta:.6g}) is outside S_mu,L: "
            f"beta + mu/delta = {b_max + mu / delta:.6g} > L = {L} (mu = {mu:.6g})"
        )
    condensation = beta_condensation(partition, beta)
    transfer = beta_blocks(condensation.betas, partition.sizes)
    dual = v_dual(frame, condensation.padded())
    err = dual.duality_error()
    if err > DUALITY_TOL:
        raise RankDeficient(f"beta dual fails F E = I by {err:.3e}")
    is_stable = mu >= linalg.norm_2_inf(frame.matrix) * (1.0 - BOUNDARY_RTOL)
    return BetaDualScheme(
        frame=frame,
        condensation=condensation,
        alphabet=Alphabet(L, delta),
        transfer=transfer,
        dual=dual,
        mu=mu,
        mu_policy=mu_policy if isinstance(mu_policy, str) else "fixed",
        eta=float(eta),
        stable=bool(is_stable),
    )


def scheme_from_dict(d: dict, frame: Frame | None = None) -> BetaDualScheme:
    """Rebuild a scheme from :meth:`BetaDualScheme.to_dict` output."""
    if frame is None:
        source = d["frame"].get("source")
        if not source:
            raise ValueError("scheme has no frame source; pass the frame explicitly")
        frame = frame_from_source(source)
    part = d["partition"]
    if (part["m"], d["frame"]["k"]) != (frame.m, frame.k):
        raise DimMismatch(f"scheme expects a {part['m']}x{d['frame']['k']} frame, got {frame.m}x{frame.k}")
    betas = d["betas"]
    return build_scheme(
        frame,
        l=len(part["sizes"]),
        L=int(d["L"]),
        mode=part["mode"],
        eta=float(d.get("eta", 0.0)),
        mu_policy=float(d["mu"]) if d.get("mu_policy") == "fixed" else d.get("mu_policy", "exact"),
        beta=betas[0] if len(set(betas)) == 1 else betas,
        delta=float(d["delta"]),
    )


def _check_ball(X: np.ndarray) -> None:
    norms = np.linalg.norm(X, axis=-1)
    if np.any(norms > 1.0 + 1e-12):
        raise InputOutOfRange(f"||x||_2 = {float(np.max(norms)):.6g} > 1; inputs must lie in the unit ball")


def encode(scheme: BetaDualScheme, x) -> QuantizationRecord:
    """Measure ``x`` and greedy-quantize the retained measurements blockwise."""
    x = np.asarray(x, dtype=float)
    if x.shape != (scheme.frame.k,):
        raise DimMismatch(f"x must have shape ({scheme.frame.k},), got {x.shape}")
    _check_ball(x)
    y = scheme.frame.matrix[: scheme.partition.used] @ x
    return greedy_quantize(scheme.transfer, scheme.alphabet, y, scheme.mu)


def encode_many(scheme: BetaDualScheme, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized encode of the rows of ``X`` (``n x k``).

    Returns ``(Q, U, ok)`` with ``Q`` and ``U`` of shape ``used x n``; ``ok``
    marks the columns whose measurements satisfy ``|y| <= mu`` (the others
    are still quantized but carry no stability guarantee).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != scheme.frame.k:
        raise DimMismatch(f"points must have {scheme.frame.k} coordinates")
    _check_ball(X)
    Y = scheme.frame.matrix[: scheme.partition.used] @ X.T
    ok = np.max(np.abs(Y), axis=0) <= scheme.mu * (1.0 + BOUNDARY_RTOL)
    Q, U = quantize_columns(scheme.transfer, scheme.alphabet, Y)
    return Q, U, ok


def decode(scheme: BetaDualScheme, q) -> np.ndarray:
    """``F_V q``; ``q`` may cover all ``m`` rows or just the retained ones."""
    q = np.asarray(q, dtype=float)
    m, used = scheme.frame.m, scheme.partition.used
    if q.shape[0] == used:
        return scheme.dual.matrix[:, :used] @ q
    if q.shape[0] == m:
        return scheme.dual.matrix @ q
    raise DimMismatch(f"q has length {q.shape[0]}, expected {used} or {m}")


def error_bound(scheme: BetaDualScheme) -> float:
    """``delta sqrt(l) beta_*^(-m_*) / sigma_min(VE)``."""
    smin = linalg.sigma_min(scheme.condensed())
    if smin <= 0:
        raise RankDeficient("sigma_min(VE) = 0")
    p = scheme.partition
    return scheme.delta * math.sqrt(p.l) * scheme.beta ** (-p.m_star) / smin


def distributed_bound(V, H, E, u_sup: float) -> float:
    """Generic block bound ``sqrt(p) ||u||_inf ||VH||_{inf->inf} / sigma_min(VE)``.

    Valid for any condensation ``V`` and transfer matrix ``H`` (dense).
    """
    V = linalg.as_matrix(V, "V")
    smin = linalg.sigma_min(V @ np.asarray(E, dtype=float))
    if smin <= 0:
        raise RankDeficient("sigma_min(VE) = 0")
    return math.sqrt(V.shape[0]) * u_sup * linalg.norm_inf_inf(V @ np.asarray(H, dtype=float)) / smin


def hsc_condensation_norm(beta: float, m: int) -> float:
    """``sigma_min`` of the two-block beta condensation of the size-``m`` harmonic semicircle frame.

    Closed form ``sqrt(1 + beta^-m) / |beta - exp(i pi/m)|``.
    """
    if m < 2 or m % 2:
        raise OddSize(f"m must be even, got {m}")
    if not beta > 1:
        raise BadBeta(f"beta must exceed 1, got {beta}")
    return math.sqrt(1.0 + beta ** (-m)) / abs(beta - complex(math.cos(math.pi / m), math.sin(math.pi / m)))


def refine_beta(frame: Frame, l: int, L: int, mode: str = BALANCED, mu_policy="exact", n_grid: int = 200) -> dict:
    """1-D sweep of the error bound over ``beta`` with ``delta = mu/(L - beta)``.

    The closed-form parameters ignore how ``sigma_min(VE)`` moves with
    ``beta``; the sweep measures how much that costs.
    """
    mu = resolve_mu(frame, mu_policy)
    partition = make_partition(frame.m, l, mode)
    rows = frame.matrix[: partition.used]
    best = (math.inf, None, None)
    for b in np.linspace(1.0, L, n_grid + 2)[1:-1]:
        VE = beta_condensation(partition, b).matrix @ rows
        smin = linalg.sigma_min(VE)
        if smin <= 0:
            continue
        d = mu / (L - b)
        val = d * math.sqrt(l) * b ** (-partition.m_star) / smin
        if val < best[0]:
            best = (val, float(b), float(d))
    analytic = error_bound(build_scheme(frame, l, L, mode=mode, mu_policy=mu_policy))
    return {"bound": best[0], "beta": best[1], "delta": best[2], "analytic_bound": analytic}
