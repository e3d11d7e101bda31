"""Quaternion and rotation helpers shared by dynamics, estimation and vision.

Conventions: world frame is NED (north, east, down), body frame is FRD
(forward, right, down). Attitude quaternions are stored scalar-first
[w, x, y, z] and represent the body<-NED frame transform: rotate(q, v_ned)
yields the vector expressed in body axes. Euler angles are ZYX yaw-pitch-roll.
"""

import math

import numpy as np

IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b (both scalar-first)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def rotate(q: np.ndarray, v) -> np.ndarray:
    """Rotate 3-vector v by quaternion q (v' = q v q*)."""
    w, x, y, z = q
    vx, vy, vz = v
    # expanded q*v*conj(q), avoids building intermediate quaternions
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array([
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    ])


def quat_from_rotvec(rv) -> np.ndarray:
    """Quaternion for a rotation of |rv| radians about rv/|rv|."""
    rx, ry, rz = float(rv[0]), float(rv[1]), float(rv[2])
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-12:
        # second-order small-angle expansion keeps unit norm to ~1e-24
        half = 0.5
        return quat_normalize(np.array([1.0, half * rx, half * ry, half * rz]))
    s = math.sin(0.5 * angle) / angle
    return np.array([math.cos(0.5 * angle), rx * s, ry * s, rz * s])


def integrate_body_rates(q_bn: np.ndarray, omega_body, dt: float) -> np.ndarray:
    """Propagate a body<-NED quaternion by body rates over dt (exact map)."""
    step = quat_from_rotvec((-omega_body[0] * dt, -omega_body[1] * dt, -omega_body[2] * dt))
    return quat_normalize(quat_mul(step, q_bn))


def quat_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body<-NED quaternion from ZYX Euler angles (radians)."""
    cr, sr = math.cos(roll * 0.5), math.sin(roll * 0.5)
    cp, sp = math.cos(pitch * 0.5), math.sin(pitch * 0.5)
    cy, sy = math.cos(yaw * 0.5), math.sin(yaw * 0.5)
    # q_nb (NED<-body) for ZYX, then conjugate
    q_nb = np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ])
    return quat_conj(q_nb)


def euler_from_quat(q_bn: np.ndarray) -> tuple:
    """(roll, pitch, yaw) of the vehicle given its body<-NED quaternion."""
    w, x, y, z = quat_conj(q_bn)  # work in NED<-body
    sinp = 2.0 * (w * y - z * x)
    sinp = max(-1.0, min(1.0, sinp))
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    pitch = math.asin(sinp)
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw


def quat_angle_to(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest rotation angle (radians) taking attitude a to attitude b."""
    d = quat_mul(a, quat_conj(b))
    vec = math.sqrt(float(d[1] * d[1] + d[2] * d[2] + d[3] * d[3]))
    # atan2 form stays accurate for tiny angles where acos saturates
    return 2.0 * math.atan2(vec, abs(float(d[0])))


def matrix_from_quat(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix equivalent to rotate(q, .)."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Quaternion (scalar first) for a proper rotation matrix."""
    t = r[0, 0] + r[1, 1] + r[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s,
                      0.25 * s,
                      (r[0, 1] + r[1, 0]) / s,
                      (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s,
                      (r[0, 1] + r[1, 0]) / s,
                      0.25 * s,
                      (r[1, 2] + r[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s,
                      (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def rotvec_from_quat(q: np.ndarray) -> np.ndarray:
    """Minimal rotation vector (axis * angle) of a unit quaternion."""
    w, x, y, z = q
    if w < 0.0:  # shortest path
        w, x, y, z = -w, -x, -y, -z
    vec_norm = math.sqrt(x * x + y * y + z * z)
    if vec_norm < 1e-12:
        return np.array([2.0 * x, 2.0 * y, 2.0 * z])
    angle = 2.0 * math.atan2(vec_norm, w)
    return np.array([x, y, z]) * (angle / vec_norm)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.atan2(math.sin(a), math.cos(a))
