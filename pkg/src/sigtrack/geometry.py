"""Scene geometry: state to (delay, bearing) maps and the antenna layout.

The radar sits at the origin looking along +y; bearing is measured from
broadside, theta = arctan(x/y), so the field of view is the y > 0 half plane.
Delay is the two-way time tau = 2*sqrt(x^2+y^2)/c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT, ConfigError, RadarConfig


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeometryParams:
    delay: float
    bearing: float

    def __post_init__(self):
        if self.delay < 0:
            raise GeometryError("negative delay")
        if not abs(self.bearing) < np.pi / 2:
            raise GeometryError("bearing outside the front half plane")


def state_to_geometry(position) -> GeometryParams:
    """Map an [x, y] position to (two-way delay, bearing)."""
    x, y = float(position[0]), float(position[1])
    r = np.hypot(x, y)
    if r == 0.0:
        raise GeometryError("bearing undefined at the origin")
    if y <= 0.0:
        raise GeometryError("position behind the array (y <= 0)")
    return GeometryParams(delay=2.0 * r / SPEED_OF_LIGHT, bearing=np.arctan2(x, y))


def geometry_jacobian(position) -> np.ndarray:
    """d(tau, theta)/d(x, y) as a 2x2 array, rows (tau, theta)."""
    x, y = float(position[0]), float(position[1])
    r2 = x * x + y * y
    r = np.sqrt(r2)
    if r == 0.0:
        raise GeometryError("jacobian undefined at the origin")
    k = 2.0 / SPEED_OF_LIGHT
    return np.array([[k * x / r, k * y / r], [y / r2, -x / r2]])


def geometry_hessians(position):
    """Second derivatives of (tau, theta) in (x, y): two 2x2 arrays."""
    x, y = float(position[0]), float(position[1])
    r2 = x * x + y * y
    r = np.sqrt(r2)
    if r == 0.0:
        raise GeometryError("hessian undefined at the origin")
    k = 2.0 / SPEED_OF_LIGHT
    r3 = r2 * r
    h_tau = k * np.array([[y * y, -x * y], [-x * y, x * x]]) / r3
    r4 = r2 * r2
    h_theta = np.array([[-2.0 * x * y, x * x - y * y], [x * x - y * y, 2.0 * x * y]]) / r4
    return h_tau, h_theta


@dataclass(frozen=True)
class ArrayGeometry:
    """Transmit/receive element positions along the array axis (meters).

    Nested layout: transmitters at lambda/2 pitch, receivers at
    num_tx*lambda/2 pitch, both centered, so the num_tx*num_rx virtual
    elements {tx_m + rx_j} form a centered uniform linear array at lambda/2.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    carrier_frequency: float
    num_tx: int
    num_rx: int

    @classmethod
    def from_config(cls, config: RadarConfig) -> "ArrayGeometry":
        lam = config.wavelength
        n_t, n_r = config.num_tx, config.num_rx
        tx = (np.arange(n_t) - (n_t - 1) / 2.0) * (lam / 2.0)
        rx = (np.arange(n_r) - (n_r - 1) / 2.0) * (n_t * lam / 2.0)
        return cls(
            tx_positions=tx,
            rx_positions=rx,
            carrier_frequency=config.carrier_frequency,
            num_tx=n_t,
            num_rx=n_r,
        )

    def __post_init__(self):
        vp = self.virtual_positions
        if len(vp) != self.num_tx * self.num_rx:
            raise ConfigError("virtual element count mismatch")
        spacing = np.diff(np.sort(vp))
        lam = SPEED_OF_LIGHT / self.carrier_frequency
        if len(spacing) and not np.allclose(spacing, lam / 2.0, rtol=1e-9):
            raise ConfigError("virtual array is not a uniform lambda/2 line")

    @property
    def virtual_positions(self) -> np.ndarray:
        """Positions tx_m + rx_j ordered receiver-major (j outer, m inner)."""
        return (self.rx_positions[:, None] + self.tx_positions[None, :]).ravel()
