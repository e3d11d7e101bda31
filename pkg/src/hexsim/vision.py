"""Synthetic camera, gimbal stabilization, centroid extraction, guidance.

The world is a grayscale blob world: the tracked subject renders as a
bright disk over a dark background, which is all the center-of-mass chain
downstream consumes. Camera axes: z along the optical axis, x along image
u (right), y along image v (down). Range is recovered by intersecting the
centroid ray with the flat ground plane at the camera's known height.
"""

import math
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .rotations import matrix_from_quat, quat_conj, quat_from_matrix, wrap_angle


@dataclass(frozen=True)
class CameraModel:
    width_px: int = 640
    height_px: int = 480
    hfov_rad: float = math.pi / 2

    @property
    def focal_px(self) -> float:
        return (self.width_px / 2.0) / math.tan(self.hfov_rad / 2.0)

    @property
    def principal_point(self) -> tuple:
        return (self.width_px / 2.0, self.height_px / 2.0)


@dataclass(frozen=True)
class ImageFrame:
    width_px: int
    height_px: int
    pixels: np.ndarray  # uint8, shape (height, width)
    frame_seq: int
    timestamp_us: int
    checksum: int

    @classmethod
    def wrap(cls, pixels: np.ndarray, frame_seq: int, timestamp_us: int):
        return cls(pixels.shape[1], pixels.shape[0], pixels, frame_seq,
                   timestamp_us, zlib.crc32(pixels.tobytes()))

    def verify(self) -> bool:
        return zlib.crc32(self.pixels.tobytes()) == self.checksum


@dataclass(frozen=True)
class TargetTrack:
    centroid_px: tuple  # (u, v)
    pixel_mass: float
    locked: bool
    estimated_range_m: float = 0.0
    timestamp_us: int = 0


# -- ground target trajectories ---------------------------------------------

MAX_TARGET_SPEED_MPS = 8.0


@dataclass(frozen=True)
class CircleTarget:
    center_ne: tuple = (0.0, 0.0)
    radius_m: float = 8.0
    speed_mps: float = 5.0
    start_bearing_rad: float = 0.0
    radius_body_m: float = 0.4  # rendered blob radius

    def __post_init__(self):
        if not 0.0 <= self.speed_mps <= MAX_TARGET_SPEED_MPS:
            raise ValueError(f"target speed capped at {MAX_TARGET_SPEED_MPS} m/s")

    def position(self, t_s: float) -> np.ndarray:
        omega = self.speed_mps / self.radius_m if self.radius_m > 0 else 0.0
        a = self.start_bearing_rad + omega * t_s
        return np.array([self.center_ne[0] + self.radius_m * math.cos(a),
                         self.center_ne[1] + self.radius_m * math.sin(a),
                         0.0])


@dataclass(frozen=True)
class PathTarget:
    """Piecewise-linear looped path traversed at constant speed."""
    points_ne: tuple
    speed_mps: float = 4.0
    radius_body_m: float = 0.4

    def __post_init__(self):
        if not 0.0 <= self.speed_mps <= MAX_TARGET_SPEED_MPS:
            raise ValueError(f"target speed capped at {MAX_TARGET_SPEED_MPS} m/s")
        if len(self.points_ne) < 2:
            raise ValueError("path needs at least two points")

    def position(self, t_s: float) -> np.ndarray:
        pts = [np.array([p[0], p[1], 0.0]) for p in self.points_ne]
        legs = [(a, b, float(np.linalg.norm(b - a)))
                for a, b in zip(pts, pts[1:] + [pts[0]])]
        total = sum(length for _, _, length in legs)
        s = (self.speed_mps * t_s) % total if total > 0 else 0.0
        for a, b, length in legs:
            if s <= length:
                return a + (b - a) * (s / length if length > 0 else 0.0)
            s -= length
        return pts[0]


# -- gimbal -------------------------------------------------------------------


@dataclass
class Gimbal:
    """Camera mount: cancels vehicle roll/pitch; yaw follows the vehicle.

    2-axis mode slaves camera yaw to vehicle yaw instantly; 3-axis mode
    rate-limits the yaw axis. Tilt is the commanded depression angle.
    """
    mode: str = "2-axis"
    tilt_rad: float = math.radians(35.0)
    yaw_rate_limit: float = math.radians(60.0)
    tilt_min: float = math.radians(5.0)
    tilt_max: float = math.radians(85.0)
    _yaw: float = 0.0

    def command_tilt(self, tilt_rad: float) -> None:
        self.tilt_rad = float(np.clip(tilt_rad, self.tilt_min, self.tilt_max))

    def orientation(self, vehicle_attitude_q, dt: float = 0.0) -> np.ndarray:
        """Camera<-NED quaternion for the current vehicle attitude."""
        from .rotations import euler_from_quat
        vehicle_yaw = euler_from_quat(vehicle_attitude_q)[2]
        if self.mode == "3-axis" and dt > 0.0:
            err = wrap_angle(vehicle_yaw - self._yaw)
            step = float(np.clip(err, -self.yaw_rate_limit * dt,
                                 self.yaw_rate_limit * dt))
            self._yaw = wrap_angle(self._yaw + step)
            yaw = self._yaw
        else:
            self._yaw = vehicle_yaw
            yaw = vehicle_yaw
        return camera_orientation(yaw, self.tilt_rad)


def camera_orientation(yaw: float, tilt: float) -> np.ndarray:
    """Camera<-NED quaternion for a heading and downward tilt."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    ct, st = math.cos(tilt), math.sin(tilt)
    z_c = np.array([ct * cy, ct * sy, st])       # optical axis
    x_c = np.array([-sy, cy, 0.0])               # image right
    y_c = np.cross(z_c, x_c)                     # image down
    r_nc = np.column_stack([x_c, y_c, z_c])      # camera -> NED
    return quat_conj(quat_from_matrix(r_nc))


# -- rendering ----------------------------------------------------------------

TARGET_BRIGHTNESS = 230
MIN_DEPTH_M = 0.5


def project_point(camera: CameraModel, cam_orientation_q, cam_position_ned,
                  point_ned):
    """(u, v, depth) of a world point, or None when behind the camera."""
    rel = np.asarray(point_ned, dtype=float) - np.asarray(cam_position_ned)
    p_cam = matrix_from_quat(cam_orientation_q) @ rel
    if p_cam[2] < MIN_DEPTH_M:
        return None
    f = camera.focal_px
    cx, cy = camera.principal_point
    return (cx + f * p_cam[0] / p_cam[2],
            cy + f * p_cam[1] / p_cam[2],
            float(p_cam[2]))


def render_frame(camera: CameraModel, cam_orientation_q, cam_position_ned,
                 target_ned, target_radius_m, frame_seq: int, timestamp_us: int,
                 noise_std: float = 0.0, rng=None) -> ImageFrame:
    """Bright-disk projection of the target over a dark background."""
    img = np.zeros((camera.height_px, camera.width_px), dtype=np.float32)
    hit = project_point(camera, cam_orientation_q, cam_position_ned, target_ned)
    if hit is not None:
        u, v, depth = hit
        r_px = camera.focal_px * target_radius_m / depth
        lo_u = max(0, int(math.floor(u - r_px - 2)))
        hi_u = min(camera.width_px, int(math.ceil(u + r_px + 2)))
        lo_v = max(0, int(math.floor(v - r_px - 2)))
        hi_v = min(camera.height_px, int(math.ceil(v + r_px + 2)))
        if lo_u < hi_u and lo_v < hi_v:
            uu, vv = np.meshgrid(np.arange(lo_u, hi_u), np.arange(lo_v, hi_v))
            dist = np.sqrt((uu + 0.5 - u) ** 2 + (vv + 0.5 - v) ** 2)
            # linear edge coverage: keeps the rasterized center of mass honest
            coverage = np.clip(r_px + 0.5 - dist, 0.0, 1.0)
            img[lo_v:hi_v, lo_u:hi_u] = TARGET_BRIGHTNESS * coverage
    if noise_std > 0.0 and rng is not None:
        img += rng.normal(0.0, noise_std, size=img.shape).astype(np.float32)
    pixels = np.clip(img, 0, 255).astype(np.uint8)
    return ImageFrame.wrap(pixels, frame_seq, timestamp_us)


# -- extraction ---------------------------------------------------------------


@dataclass(frozen=True)
class LockThresholds:
    intensity: int = 60
    mass_on: float = 4000.0   # lock acquires at/above this pixel mass
    mass_off: float = 1500.0  # and releases below this one (hysteresis)


def extract_centroid(frame: ImageFrame, thresholds: LockThresholds = LockThresholds(),
                     prev_locked: bool = False) -> TargetTrack:
    """Intensity-weighted center of mass over above-threshold pixels.

    Coordinates are pixel indices (pixel i contributes coordinate i); a
    continuous image position u maps to index coordinate u - 0.5.
    """
    pixels = frame.pixels
    mask = pixels > thresholds.intensity
    weights = pixels.astype(np.float64) * mask
    mass = float(weights.sum())
    limit = thresholds.mass_off if prev_locked else thresholds.mass_on
    if mass <= 0.0:
        return TargetTrack((math.nan, math.nan), 0.0, False,
                           timestamp_us=frame.timestamp_us)
    vs, us = np.nonzero(mask)
    w = weights[vs, us]
    u_bar = float((us * w).sum() / mass)
    v_bar = float((vs * w).sum() / mass)
    locked = mass >= limit
    return TargetTrack((u_bar, v_bar), mass, locked,
                       timestamp_us=frame.timestamp_us)


# -- guidance -----------------------------------------------------------------


@dataclass(frozen=True)
class GuidanceParams:
    gain: float = 0.5               # 1/s on metric pixel error
    range_gain: float = 0.4         # 1/s on horizontal standoff error
    standoff_slant_m: float = 14.0  # regulated slant range
    min_standoff_m: float = 10.0    # hard floor, never commanded below
    speed_limit_mps: float = 5.0
    tilt_gain: float = 2.0          # gimbal tilt servo on the v error
    brake_accel_mps2: float = 2.0   # closure-speed envelope into the floor


def ray_ground_intersection(camera: CameraModel, cam_orientation_q,
                            cam_position_ned, pixel_uv, ground_down: float = 0.0):
    """World point where the pixel ray meets the ground plane (or None).

    pixel_uv uses extract_centroid's index coordinates (+0.5 = continuous).
    """
    f = camera.focal_px
    cx, cy = camera.principal_point
    ray_cam = np.array([(pixel_uv[0] + 0.5 - cx) / f,
                        (pixel_uv[1] + 0.5 - cy) / f, 1.0])
    ray_ned = matrix_from_quat(cam_orientation_q).T @ ray_cam
    dz = ground_down - cam_position_ned[2]
    if ray_ned[2] * dz <= 0.0:  # ray parallel to or away from the plane
        return None
    t = dz / ray_ned[2]
    return np.asarray(cam_position_ned) + t * ray_ned


def guidance_step(track: TargetTrack, camera: CameraModel, cam_orientation_q,
                  estimate, params: GuidanceParams = GuidanceParams(),
                  ground_down: float = 0.0, prev_bearing: float = None,
                  dt: float = 0.04, target_vel_est=None):
    """Velocity setpoint + yaw guidance from the locked track.

    target_vel_est (if available) enables rigid-formation feedforward: the
    vehicle moves so the target-relative geometry rotates with the measured
    bearing rate instead of chasing range errors after the fact. Returns
    (TrackGuidance-fields dict, tilt_error_rad) so callers own their gimbal
    state. Unlocked tracks yield a zero setpoint.
    """
    cx, cy = camera.principal_point
    if not track.locked or math.isnan(track.centroid_px[0]):
        return {
            "velocity_ned_mps": (0.0, 0.0, 0.0),
            "yaw_sp": None, "yaw_rate_ff": 0.0, "locked": False,
            "slant_range_m": math.inf, "target_ned_est": (0.0, 0.0, ground_down),
        }, 0.0

    position = estimate.position_ned_m
    target = ray_ground_intersection(camera, cam_orientation_q, position,
                                     track.centroid_px, ground_down)
    if target is None:
        return {
            "velocity_ned_mps": (0.0, 0.0, 0.0),
            "yaw_sp": None, "yaw_rate_ff": 0.0, "locked": False,
            "slant_range_m": math.inf, "target_ned_est": (0.0, 0.0, ground_down),
        }, 0.0

    delta = target - position
    slant = float(np.linalg.norm(delta))
    d_h = float(np.linalg.norm(delta[:2]))
    bearing = math.atan2(delta[1], delta[0])

    f = camera.focal_px
    # lateral: metric offset of the centroid at the target's range
    e_u = (track.centroid_px[0] + 0.5 - cx) / f
    lateral = params.gain * e_u * slant
    height = abs(ground_down - position[2])
    # slant standoff converted to the horizontal plane at current height
    d_h_sp = math.sqrt(max(params.standoff_slant_m ** 2 - height ** 2,
                           (0.25 * params.standoff_slant_m) ** 2))
    yaw_rate_ff = 0.0
    if prev_bearing is not None and dt > 0.0:
        yaw_rate_ff = wrap_angle(bearing - prev_bearing) / dt

    fwd = np.array([math.cos(bearing), math.sin(bearing)])
    right = np.array([-math.sin(bearing), math.cos(bearing)])

    approach = params.range_gain * (d_h - d_h_sp)
    if target_vel_est is not None:
        vt = np.asarray(target_vel_est)[:2]
        # keep the relative geometry rotating with the measured bearing rate
        approach += float(np.dot(vt, fwd))
        lateral += float(np.dot(vt, right)) - yaw_rate_ff * d_h

    floor_h = math.sqrt(max(params.min_standoff_m ** 2 - height ** 2, 0.0))
    slack = d_h - floor_h - 1.0
    if slack < 0.0:  # hard floor: never command below the standoff
        approach = min(approach, params.range_gain * slack)
    else:
        # braking envelope: closure speed the vehicle can still shed in time
        approach = min(approach,
                       math.sqrt(2.0 * params.brake_accel_mps2 * slack))

    vel_h = approach * fwd + lateral * right
    speed = float(np.linalg.norm(vel_h))
    if speed > params.speed_limit_mps:
        vel_h *= params.speed_limit_mps / speed

    tilt_error = params.tilt_gain * (track.centroid_px[1] + 0.5 - cy) / f
    return {
        "velocity_ned_mps": (float(vel_h[0]), float(vel_h[1]), 0.0),
        "yaw_sp": bearing, "yaw_rate_ff": yaw_rate_ff, "locked": True,
        "slant_range_m": slant, "target_ned_est": tuple(target),
    }, tilt_error


class VisionTracker:
    """Owns the gimbal, lock hysteresis and bearing memory for one camera.

    process() consumes the freshest frame (from the image hub) plus the
    navigation estimate and yields (TargetTrack, guidance dict); the gimbal
    tilt is servoed to keep the centroid vertically centered.
    """

    def __init__(self, camera: CameraModel = CameraModel(),
                 gimbal: Gimbal = None,
                 params: GuidanceParams = GuidanceParams(),
                 thresholds: LockThresholds = LockThresholds(),
                 ground_down: float = 0.0):
        self.camera = camera
        self.gimbal = gimbal if gimbal is not None else Gimbal()
        self.params = params
        self.thresholds = thresholds
        self.ground_down = ground_down
        self.prev_locked = False
        self._prev_bearing = None
        self._prev_t_us = None
        self._prev_target = None
        self._target_vel = None

    def process(self, frame: ImageFrame, estimate) -> tuple:
        track = extract_centroid(frame, self.thresholds, self.prev_locked)
        self.prev_locked = track.locked
        dt = 0.0
        if self._prev_t_us is not None:
            dt = max((frame.timestamp_us - self._prev_t_us) * 1e-6, 0.0)
        self._prev_t_us = frame.timestamp_us

        cam_q = self.gimbal.orientation(estimate.attitude_q)
        guidance, tilt_error = guidance_step(
            track, self.camera, cam_q, estimate, self.params,
            self.ground_down, self._prev_bearing, dt, self._target_vel)
        self._prev_bearing = guidance["yaw_sp"]
        if guidance["locked"] and dt > 0.0:
            target = np.asarray(guidance["target_ned_est"])
            if self._prev_target is not None:
                raw = (target - self._prev_target) / dt
                if self._target_vel is None:
                    self._target_vel = raw
                else:  # low-pass: centroid quantization is spiky frame to frame
                    self._target_vel = 0.7 * self._target_vel + 0.3 * raw
            self._prev_target = target
        elif not guidance["locked"]:
            self._prev_target = None
            self._target_vel = None
        if track.locked and dt > 0.0:
            self.gimbal.command_tilt(self.gimbal.tilt_rad + tilt_error * dt)
        if track.locked:
            track = replace(track, estimated_range_m=guidance["slant_range_m"])
        return track, guidance
