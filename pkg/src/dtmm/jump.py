"""Jump transfer matrices between piecewise-constant media and their composition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kn
from .charroots import RootFrame
from .errors import ChainingError, DegeneracyError


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """F(x_to) = Q F(x_from). Frames are the root frames Q was built against."""

    x_from: float
    x_to: float
    Q: np.ndarray
    frame_from: RootFrame | None = None
    frame_to: RootFrame | None = None

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def det(self):
        return complex(np.linalg.det(self.Q))

    def __matmul__(self, other):
        """self applied after other."""
        return compose_transfers([other, self])


@dataclass(frozen=True, eq=False)
class Layer:
    """Slab [x_lo, x_hi] with constant characteristic roots."""

    x_lo: float
    x_hi: float
    frame: RootFrame

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValueError(f"layer needs x_lo < x_hi, got [{self.x_lo}, {self.x_hi}]")
        if not self.frame.gap > 0:
            raise DegeneracyError(self.frame.x, gap=self.frame.gap,
                                  message="layer frame has coincident roots")


def identity_transfer(x, n, frame=None):
    return TransferMatrix(x, x, np.eye(n, dtype=complex), frame, frame)


def _check_side(fr, side):
    if not fr.gap > 0:
        raise DegeneracyError(fr.x, gap=fr.gap,
                              message=f"frame {side} is degenerate (gap {fr.gap:.3e})")


def jump_between(frameA, xA, frameB, xB):
    """exp(-xB K_B) D_B^-1 D_A exp(xA K_A), solving D_B Y = D_A for the middle factor."""
    _check_side(frameA, "A")
    _check_side(frameB, "B")
    kA = np.asarray(frameA.roots, dtype=complex)
    kB = np.asarray(frameB.roots, dtype=complex)
    DA, _ = kn.vandermonde(np.ascontiguousarray(kA))
    DB, _ = kn.vandermonde(np.ascontiguousarray(kB))
    Y = np.linalg.solve(DB, DA)
    return np.exp(-xB * kB)[:, None] * Y * np.exp(xA * kA)[None, :]


def jump_matrix(frameA, frameB, X):
    """Zero-width jump across an interface at X from medium A to medium B."""
    Q = jump_between(frameA, X, frameB, X)
    return TransferMatrix(float(X), float(X), Q, frameA, frameB)


def root_differences(roots):
    """prod_{i>j} (k_i - k_j), i.e. det D."""
    k = np.asarray(roots, dtype=complex)
    out = 1.0 + 0j
    for i in range(k.size):
        for j in range(i):
            out *= k[i] - k[j]
    return out


def jump_det(frameA, frameB, X):
    """Closed-form det of jump_matrix from root sums and root differences."""
    _check_side(frameA, "A")
    _check_side(frameB, "B")
    sA = np.sum(frameA.roots)
    sB = np.sum(frameB.roots)
    return complex(np.exp(X * (sA - sB)) * root_differences(frameA.roots)
                   / root_differences(frameB.roots))


def compose_transfers(transfers, tol=1e-12):
    """Chain transfers given in application order; the result maps first x_from to last x_to."""
    transfers = list(transfers)
    if not transfers:
        raise ValueError("compose_transfers needs at least one transfer")
    Q = np.array(transfers[0].Q, dtype=complex)
    for i in range(len(transfers) - 1):
        a, b = transfers[i], transfers[i + 1]
        if abs(a.x_to - b.x_from) > tol * max(1.0, abs(a.x_to)):
            raise ChainingError(i, a.x_to, b.x_from)
        Q = b.Q @ Q
    first, last = transfers[0], transfers[-1]
    return TransferMatrix(first.x_from, last.x_to, Q, first.frame_from, last.frame_to)


def layered_transfer(layers):
    """Transfer from the left edge of the first layer to the right edge of the last.

    Envelopes are constant inside each layer, so only interface jumps contribute.
    """
    layers = list(layers)
    if not layers:
        raise ValueError("layered_transfer needs at least one layer")
    n = layers[0].frame.n
    eye = np.eye(n, dtype=complex)
    pieces = []
    for i, layer in enumerate(layers):
        pieces.append(TransferMatrix(layer.x_lo, layer.x_hi, eye, layer.frame, layer.frame))
        if i + 1 < len(layers):
            right = layers[i + 1]
            if abs(layer.x_hi - right.x_lo) > 1e-12 * max(1.0, abs(layer.x_hi)):
                raise ChainingError(i, layer.x_hi, right.x_lo)
            pieces.append(jump_matrix(layer.frame, right.frame, layer.x_hi))
    return compose_transfers(pieces)


def shifted(transfer_Q, shift, frame_r, frame_s):
    """exp(-shift K_s) Q exp(shift K_r): the transfer matrix after moving every interface by shift."""
    kr = np.asarray(frame_r.roots, dtype=complex)
    ks = np.asarray(frame_s.roots, dtype=complex)
    return np.exp(-shift * ks)[:, None] * np.asarray(transfer_Q) * np.exp(shift * kr)[None, :]
