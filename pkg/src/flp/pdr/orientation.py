"""Relative device orientation from accelerometer and gyro only.

The quaternion is propagated with the bias-corrected gyro and pulled
towards the accelerometer's gravity direction for roll/pitch. Heading is
the unwrapped integral of the angular rate about the vertical, so it is
relative by construction: nothing observes absolute yaw.
"""

from __future__ import annotations

import math

import numpy as np

from .types import GRAVITY, ImuStream, NotStatic, OrientationState, as_stream

K_ACC = 0.02
ACC_GATE = 1.0
STATIC_GYRO_STD = 0.01
STATIC_ACCEL_STD = 0.05


def _qmul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw)


def _qexp(vx, vy, vz):
    """Quaternion of the rotation vector (vx, vy, vz)."""
    ang = math.sqrt(vx * vx + vy * vy + vz * vz)
    if ang < 1e-12:
        return (1.0, 0.5 * vx, 0.5 * vy, 0.5 * vz)
    s = math.sin(0.5 * ang) / ang
    return (math.cos(0.5 * ang), vx * s, vy * s, vz * s)


def _up_in_body(q):
    """Third row of R(q): the reference z axis expressed in the body frame."""
    w, x, y, z = q
    return (2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y))


def _normalize(q):
    n = math.sqrt(sum(c * c for c in q))
    return tuple(c / n for c in q)


def quaternion_from_gravity(accel) -> np.ndarray:
    """Level-aligning quaternion (zero yaw) for a resting accelerometer reading."""
    a = np.asarray(accel, dtype=float)
    u = a / np.linalg.norm(a)
    # rotate body vector u onto reference z
    axis = np.cross(u, [0.0, 0.0, 1.0])
    s = np.linalg.norm(axis)
    c = float(np.clip(u[2], -1.0, 1.0))
    if s < 1e-12:
        return np.array([1.0, 0, 0, 0]) if c > 0 else np.array([0.0, 1.0, 0, 0])
    ang = math.atan2(s, c)
    q = _qexp(*(axis / s * ang))
    return np.array(q)


def _step(q, bias, heading, accel, gyro, dt, k_acc):
    wx = gyro[0] - bias[0]
    wy = gyro[1] - bias[1]
    wz = gyro[2] - bias[2]
    ux, uy, uz = _up_in_body(q)
    heading += (wx * ux + wy * uy + wz * uz) * dt
    q = _qmul(q, _qexp(wx * dt, wy * dt, wz * dt))
    ax, ay, az = accel
    an = math.sqrt(ax * ax + ay * ay + az * az)
    if k_acc > 0 and abs(an - GRAVITY) < ACC_GATE:
        ux, uy, uz = _up_in_body(q)
        mx, my, mz = ax / an, ay / an, az / an
        # body-frame correction k * (u_meas x u_est): perpendicular to vertical, no yaw
        cx = my * uz - mz * uy
        cy = mz * ux - mx * uz
        cz = mx * uy - my * ux
        q = _qmul(q, _qexp(k_acc * cx, k_acc * cy, k_acc * cz))
    return _normalize(q), heading


def update_orientation(state: OrientationState, sample, dt: float, k_acc: float = K_ACC) -> OrientationState:
    if not 0 < dt <= 0.1:
        raise ValueError(f"dt {dt} outside (0, 0.1]")
    q, heading = _step(tuple(state.quaternion), state.gyro_bias, state.heading,
                       sample.accel, sample.gyro, dt, k_acc)
    return OrientationState(np.array(q), state.gyro_bias.copy(), heading)


def estimate_gyro_bias(window) -> np.ndarray:
    """Mean gyro over a static window; raises NotStatic otherwise."""
    s = as_stream(window)
    if s.duration < 1.0 - 1e-9:
        raise ValueError("bias window must span at least 1 s")
    gstd = np.linalg.norm(s.gyro, axis=1).std()
    astd = np.linalg.norm(s.accel, axis=1).std()
    if gstd >= STATIC_GYRO_STD or astd >= STATIC_ACCEL_STD:
        raise NotStatic(f"gyro-norm std {gstd:.4f} rad/s, accel-norm std {astd:.4f} m/s^2")
    return s.gyro.mean(axis=0)


class OrientationTracker:
    """Runs update_orientation over chunks and refreshes the bias on static phases."""

    def __init__(self, fs: float, k_acc: float = K_ACC, bias_window: float = 1.0,
                 state: OrientationState | None = None):
        self.fs = fs
        self.k_acc = k_acc
        self.state = state
        self.bias_n = max(2, int(round(bias_window * fs)) + 1)
        self._win_t = []
        self._win_a = []
        self._win_g = []
        self._last_t = None
        self.bias_updates = 0

    def process(self, t, accel, gyro) -> np.ndarray:
        """Headings (rad) after each sample of the chunk."""
        n = len(t)
        out = np.empty(n)
        if self.state is None and n:
            self.state = OrientationState(quaternion_from_gravity(accel[0]))
        st = self.state
        q = tuple(st.quaternion)
        bias = st.gyro_bias
        heading = st.heading
        t = np.asarray(t, dtype=float).tolist()
        accel = np.asarray(accel, dtype=float).tolist()
        gyro = np.asarray(gyro, dtype=float).tolist()
        for i in range(n):
            if self._last_t is not None:
                dt = t[i] - self._last_t
                if not 0 < dt <= 0.1:
                    raise ValueError(f"dt {dt} outside (0, 0.1]")
                q, heading = _step(q, bias, heading, accel[i], gyro[i], dt, self.k_acc)
            self._last_t = t[i]
            out[i] = heading
            self._win_t.append(t[i])
            self._win_a.append(accel[i])
            self._win_g.append(gyro[i])
            if len(self._win_t) >= self.bias_n:
                win = ImuStream(self._win_t, self._win_a, self._win_g)
                try:
                    bias = estimate_gyro_bias(win)
                    self.bias_updates += 1
                except NotStatic:
                    pass
                self._win_t, self._win_a, self._win_g = [], [], []
        self.state = OrientationState(np.array(q), np.asarray(bias, dtype=float), heading)
        return out
