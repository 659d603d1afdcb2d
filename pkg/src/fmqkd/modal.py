"""Jones calculus for a polarized field guided in two spatial fiber modes.

The quantum channel at 848 nm propagates in the fundamental mode (LP01) and
the first higher-order mode (LP11) of standard single-mode telecom fiber,
each carrying a full polarization state.  A field is therefore a complex
4-vector indexed as

    0: LP01 horizontal,  1: LP01 vertical,
    2: LP11 horizontal,  3: LP11 vertical,

plus one accumulated group delay per spatial mode.  The two-fold geometric
degeneracy of LP11 is lumped into a single mode: the receive chain only
cares about arrival time and polarization, not the lobe orientation.

Passive components act as 4x4 complex matrices together with a per-mode
delay increment.  All values here are immutable; operations are pure
functions, so trial workers can share them freely.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

LP01 = 0
LP11 = 1
SPATIAL_MODES = ("LP01", "LP11")

# Polarization state / detector ordering used everywhere downstream.
BASES = ("AD", "RL")
STATES = ("A", "D", "R", "L")

_SQRT_HALF = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class JonesVector:
    """Unit-norm polarization state in the (H, V) basis.

    Global phase carries no information; every observable in the simulator
    is the magnitude of a projection.
    """

    h: complex
    v: complex

    def __post_init__(self):
        norm = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"Jones vector must be unit norm, got |.|^2 = {norm!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=np.complex128)


def encode_jones(basis: str, bit: int) -> JonesVector:
    """Polarization state for one BB84 symbol.

    A = (1, 1)/sqrt2, D = (1, -1)/sqrt2, R = (1, i)/sqrt2, L = (1, -i)/sqrt2.
    """
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}, got {basis!r}")
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if basis == "AD":
        return JonesVector(_SQRT_HALF, _SQRT_HALF if bit == 0 else -_SQRT_HALF)
    return JonesVector(_SQRT_HALF, 1j * _SQRT_HALF if bit == 0 else -1j * _SQRT_HALF)


def state_jones(state_index: int) -> JonesVector:
    """Jones vector of detector/state index 0..3 in STATES order."""
    return encode_jones(BASES[state_index // 2], state_index % 2)


ANALYZERS = tuple(state_jones(k) for k in range(4))


@dataclass(frozen=True)
class ModalState:
    """Field amplitudes over (LP01, LP11) x (H, V) plus per-mode group delay.

    ``amplitudes`` is dimensionless (total power = sum |a_i|^2), ``delay``
    is in seconds for (LP01, LP11).
    """

    amplitudes: np.ndarray
    delay: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(4).copy()
        dly = np.asarray(self.delay, dtype=np.float64).reshape(2).copy()
        amps.flags.writeable = False
        dly.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "delay", dly)

    @classmethod
    def launch(cls, jones: JonesVector, lp11_fraction: float = 0.0,
               lp11_jones: JonesVector | None = None) -> "ModalState":
        """Unit-power state with a configurable LP11 power fraction.

        By default both modes carry the same polarization; they decorrelate
        through propagation.
        """
        if not 0.0 <= lp11_fraction <= 1.0:
            raise ValueError("lp11_fraction must be in [0, 1]")
        j01 = jones.as_array() * math.sqrt(1.0 - lp11_fraction)
        j11 = (lp11_jones or jones).as_array() * math.sqrt(lp11_fraction)
        return cls(np.concatenate([j01, j11]), np.zeros(2))

    def power(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def spatial_power(self, mode: int) -> float:
        sl = slice(2 * mode, 2 * mode + 2)
        return float(np.sum(np.abs(self.amplitudes[sl]) ** 2))

    def jones(self, mode: int) -> np.ndarray:
        """Unnormalized Jones sub-vector of one spatial mode."""
        return self.amplitudes[2 * mode: 2 * mode + 2].copy()


@dataclass(frozen=True)
class TransferOperator:
    """Action of one passive element (or chain) at a fixed wavelength.

    ``matrix`` maps the 4-component field; ``delay_inc`` adds to the
    per-spatial-mode group delay.  Passive elements never gain: the largest
    singular value stays at or below one.
    """

    matrix: np.ndarray
    delay_inc: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128).reshape(4, 4).copy()
        dly = np.asarray(self.delay_inc, dtype=np.float64).reshape(2).copy()
        mat.flags.writeable = False
        dly.flags.writeable = False
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "delay_inc", dly)

    @classmethod
    def identity(cls) -> "TransferOperator":
        return cls(np.eye(4, dtype=np.complex128), np.zeros(2))

    @classmethod
    def from_loss_db(cls, loss_db: float) -> "TransferOperator":
        """Mode-flat attenuation."""
        t = 10.0 ** (-loss_db / 20.0)
        return cls(t * np.eye(4, dtype=np.complex128), np.zeros(2))

    def largest_singular_value(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False)[0])

    def is_passive(self, tol: float = 1e-9) -> bool:
        return self.largest_singular_value() <= 1.0 + tol


def apply(op: TransferOperator, state: ModalState) -> ModalState:
    """Propagate a state through one operator."""
    return ModalState(op.matrix @ state.amplitudes, state.delay + op.delay_inc)


def compose(a: TransferOperator, b: TransferOperator) -> TransferOperator:
    """Operator equal to applying ``b`` first, then ``a``."""
    return TransferOperator(a.matrix @ b.matrix, a.delay_inc + b.delay_inc)


def project_polarization(state: ModalState, analyzer: JonesVector,
                         spatial_mode: int) -> complex:
    """Inner product of one spatial mode's field with an analyzer state.

    |result|^2 is the power that analyzer would pass from that mode.
    """
    sub = state.jones(spatial_mode)
    a = analyzer.as_array()
    return complex(np.conj(a) @ sub)


# ---------------------------------------------------------------------------
# Operator building blocks shared by the element library.
# ---------------------------------------------------------------------------

def spatial_coupling(theta: float, phi: float) -> np.ndarray:
    """Polarization-preserving LP01 <-> LP11 power exchange.

    ``theta`` sets the coupled fraction (sin^2 theta), ``phi`` the
    intermodal phase that makes downstream interference wavelength
    sensitive.
    """
    c = math.cos(theta)
    s = math.sin(theta)
    e = cmath.exp(1j * phi)
    block = np.array([[c, -s / e], [s * e, c]], dtype=np.complex128)
    return np.kron(block, np.eye(2, dtype=np.complex128))


def polarization_block(j01: np.ndarray, j11: np.ndarray) -> np.ndarray:
    """Independent Jones matrices acting on each spatial mode."""
    out = np.zeros((4, 4), dtype=np.complex128)
    out[:2, :2] = j01
    out[2:, 2:] = j11
    return out


def mode_diag(t01: float, t11: float) -> np.ndarray:
    """Per-spatial-mode amplitude attenuation, flat over polarization."""
    return np.diag([t01, t01, t11, t11]).astype(np.complex128)


def su2_rotation(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """SU(2) from an axis-angle 3-vector (Pauli basis)."""
    angle = math.sqrt(alpha * alpha + beta * beta + gamma * gamma)
    if angle < 1e-15:
        return np.eye(2, dtype=np.complex128)
    nx, ny, nz = alpha / angle, beta / angle, gamma / angle
    c = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)
    return np.array(
        [[c - 1j * s * nz, -s * (ny + 1j * nx)],
         [s * (ny - 1j * nx), c + 1j * s * nz]],
        dtype=np.complex128,
    )


def random_su2(rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random unitary polarization rotation."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return np.array(
        [[q[0] + 1j * q[1], q[2] + 1j * q[3]],
         [-q[2] + 1j * q[3], q[0] - 1j * q[1]]],
        dtype=np.complex128,
    )


def polar_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition m = U P.

    Used to model an ideally aligned polarization controller: undoing U
    leaves only the non-unitary (diattenuating) residual of a channel.
    """
    w, _, vh = np.linalg.svd(np.asarray(m, dtype=np.complex128))
    return w @ vh
