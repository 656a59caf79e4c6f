"""LoS VLC downlink channel: Lambertian path loss, SINR and Shannon rates.

Positions are 2-D floor coordinates in metres; every AP sits on the ceiling a
fixed vertical distance ``h`` above the receivers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class InterferencePolicy(str, enum.Enum):
    FREQUENCY_REUSE = "frequency_reuse"
    FULL_INTERFERENCE = "full_interference"


@dataclass(frozen=True)
class PhyParams:
    """Physical-layer constants. Defaults are the reference indoor setup."""

    half_intensity_angle: float = 30.0  # deg
    pd_area: float = 1e-4  # m^2
    fov_semi_angle: float = 90.0  # deg
    refractive_index: float = 1.5
    optical_filter_gain: float = 1.0
    tx_optical_power: float = 10.0  # W
    oe_efficiency: float = 0.53
    dc_bias_ratio: float = 3.0
    noise_psd: float = 1e-19  # W/Hz
    bandwidth: float = 20e6  # Hz
    vertical_distance: float = 2.3  # m

    def __post_init__(self):
        for name in (
            "half_intensity_angle", "pd_area", "fov_semi_angle", "refractive_index",
            "optical_filter_gain", "tx_optical_power", "oe_efficiency",
            "dc_bias_ratio", "noise_psd", "bandwidth", "vertical_distance",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not self.half_intensity_angle < 90:
            raise ValueError("half_intensity_angle must lie in (0, 90) degrees")
        if not self.fov_semi_angle <= 90:
            raise ValueError("fov_semi_angle must lie in (0, 90] degrees")

    @property
    def lambertian_order(self) -> float:
        return lambertian_order(self.half_intensity_angle)

    @property
    def noise_power(self) -> float:
        """Electrical noise term iota^2 N B."""
        return self.dc_bias_ratio**2 * self.noise_psd * self.bandwidth


@dataclass(frozen=True)
class ApLayout:
    positions: np.ndarray  # (n_aps, 2)
    interference_policy: InterferencePolicy = InterferencePolicy.FREQUENCY_REUSE
    phy: PhyParams = field(default_factory=PhyParams)
    room: tuple[float, float] | None = None  # (width, depth) used for bound checks

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError("ApLayout needs at least one 2-D AP position")
        if not np.all(np.isfinite(pos)):
            raise ValueError("AP positions must be finite")
        if self.room is not None:
            w, d = self.room
            if np.any(pos < 0) or np.any(pos[:, 0] > w) or np.any(pos[:, 1] > d):
                raise ValueError("AP positions must lie inside the room")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "interference_policy", InterferencePolicy(self.interference_policy))

    @property
    def n_aps(self) -> int:
        return self.positions.shape[0]

    def with_policy(self, policy) -> "ApLayout":
        return replace(self, interference_policy=InterferencePolicy(policy))


def lambertian_order(half_angle_deg: float) -> float:
    """Lambertian emission order m = -1 / log2(cos(half_angle))."""
    if not 0 < half_angle_deg < 90:
        raise ValueError(f"half-intensity angle must lie in (0, 90) degrees, got {half_angle_deg}")
    return -1.0 / math.log2(math.cos(math.radians(half_angle_deg)))


def concentrator_gain(psi_deg, n: float, fov_deg: float):
    """Optical concentrator gain n^2 / sin^2(FoV) inside the field of view, else 0.

    Works elementwise on arrays of incidence angles.
    """
    if n <= 0:
        raise ValueError("refractive index must be positive")
    if not 0 < fov_deg <= 90:
        raise ValueError("FoV semi-angle must lie in (0, 90] degrees")
    psi = np.asarray(psi_deg, dtype=float)
    if np.any(psi < 0):
        raise ValueError("incidence angle must be non-negative")
    gain = n**2 / math.sin(math.radians(fov_deg)) ** 2
    out = np.where(psi <= fov_deg, gain, 0.0)
    return float(out) if out.ndim == 0 else out


def path_loss(user_pos, ap_pos, phy: PhyParams):
    """DC channel gain between receivers and an AP (closed form).

    ``user_pos`` and ``ap_pos`` broadcast against each other over their
    leading axes; the last axis holds the (x, y) coordinates.
    """
    user_pos = np.asarray(user_pos, dtype=float)
    ap_pos = np.asarray(ap_pos, dtype=float)
    h = phy.vertical_distance
    m = phy.lambertian_order
    r2 = np.sum((user_pos - ap_pos) ** 2, axis=-1)
    d2 = r2 + h * h
    const = (
        (m + 1) * phy.pd_area * phy.optical_filter_gain * phy.refractive_index**2 * h ** (m + 1)
        / (2 * math.pi * math.sin(math.radians(phy.fov_semi_angle)) ** 2)
    )
    gain = const * d2 ** (-(m + 3) / 2)
    if phy.fov_semi_angle < 90:
        # incidence angle psi = arccos(h / D)
        psi = np.degrees(np.arccos(np.clip(h / np.sqrt(d2), -1.0, 1.0)))
        gain = np.where(psi > phy.fov_semi_angle, 0.0, gain)
    return float(gain) if np.ndim(gain) == 0 else gain


def sinr(h_serving, h_interferers, phy: PhyParams):
    """SINR for a serving gain and a collection of interfering gains.

    ``h_interferers`` may be empty; with arrays, the interferer axis is the last one.
    """
    kappa, power = phy.oe_efficiency, phy.tx_optical_power
    signal = kappa**2 * (power * np.asarray(h_serving, dtype=float)) ** 2
    hi = np.asarray(h_interferers, dtype=float)
    interference = kappa**2 * np.sum((power * hi) ** 2, axis=-1) if hi.size else 0.0
    out = signal / (phy.noise_power + interference)
    return float(out) if np.ndim(out) == 0 else out


def capacity(snr, bandwidth: float):
    """Shannon rate B log2(1 + SINR) in bit/s."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("SINR must be non-negative")
    out = bandwidth * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def handover_efficiency(x_prev, eta0: float):
    """Affine handover efficiency (1 - eta0) x_prev + eta0.

    Equals 1 when the user keeps its AP (x_prev = 1) and eta0 after a switch.
    Relaxed inputs in [0, 1] are accepted.
    """
    if not 0 < eta0 <= 1:
        raise ValueError("eta0 must lie in (0, 1]")
    x = np.asarray(x_prev, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("x_prev must lie in [0, 1]")
    out = (1.0 - eta0) * x + eta0
    return float(out) if out.ndim == 0 else out


def gain_matrix(positions, layout: ApLayout) -> np.ndarray:
    """Channel gains H[..., user, ap] for positions of shape (..., n_users, 2)."""
    positions = np.asarray(positions, dtype=float)
    return path_loss(positions[..., :, None, :], layout.positions, layout.phy)


def rates_from_gains(gains: np.ndarray, layout: ApLayout) -> np.ndarray:
    """Achievable rate for every (user, AP) pair given the gain array (..., users, aps)."""
    phy = layout.phy
    kappa, power = phy.oe_efficiency, phy.tx_optical_power
    elec = kappa**2 * (power * gains) ** 2
    if layout.interference_policy is InterferencePolicy.FULL_INTERFERENCE:
        # interferers always transmit at full power
        interference = elec.sum(axis=-1, keepdims=True) - elec
    else:
        interference = 0.0
    snr = elec / (phy.noise_power + interference)
    return phy.bandwidth * np.log2(1.0 + snr)


def rate_tensor(predicted_positions, layout: ApLayout, T: int | None = None) -> np.ndarray:
    """Predicted rates R[t, user, ap] in bit/s.

    ``predicted_positions`` has shape (T, n_users, 2); row ``t`` holds the
    positions for the (t+1)-th future service time.
    """
    pos = np.asarray(predicted_positions, dtype=float)
    if pos.ndim != 3 or pos.shape[-1] != 2:
        raise ValueError(f"predicted positions must have shape (T, users, 2), got {pos.shape}")
    if T is not None:
        if T < 1:
            raise ValueError("T must be >= 1")
        if pos.shape[0] != T:
            raise ValueError(f"expected positions for {T} service times, got {pos.shape[0]}")
    return rates_from_gains(gain_matrix(pos, layout), layout)
