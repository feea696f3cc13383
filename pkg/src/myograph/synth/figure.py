"""2D stick-figure forward kinematics onto the 25-keypoint body layout.

Joint angles are in radians. Shoulder/hip angles measure the limb's
deviation from hanging straight down, positive swinging forward (+x in
image coordinates, which are x-right / y-down, normalized to [0, 1]).
Elbow/knee angles are bend amounts (0 = straight); a bent knee rotates
the shank backward relative to the thigh, a bent elbow rotates the
forearm forward relative to the upper arm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# OpenPose BODY_25 joint indices
NOSE = 0
NECK = 1
R_SHOULDER = 2
R_ELBOW = 3
R_WRIST = 4
L_SHOULDER = 5
L_ELBOW = 6
L_WRIST = 7
MID_HIP = 8
R_HIP = 9
R_KNEE = 10
R_ANKLE = 11
L_HIP = 12
L_KNEE = 13
L_ANKLE = 14
R_EYE = 15
L_EYE = 16
R_EAR = 17
L_EAR = 18
L_BIG_TOE = 19
L_SMALL_TOE = 20
L_HEEL = 21
R_BIG_TOE = 22
R_SMALL_TOE = 23
R_HEEL = 24

N_KEYPOINTS = 25

# joints a program may animate; anything omitted stays at 0
ANIMATED_JOINTS = (
    "shoulder_l",
    "shoulder_r",
    "elbow_l",
    "elbow_r",
    "hip_l",
    "hip_r",
    "knee_l",
    "knee_r",
    "root_x",
    "root_y",
    "lean",
)


@dataclass(frozen=True)
class StickFigure:
    """Fixed bone lengths and static offsets; projects joint angles to keypoints."""

    torso: float = 0.21
    head: float = 0.062
    upper_arm: float = 0.095
    forearm: float = 0.095
    thigh: float = 0.135
    shank: float = 0.135
    shoulder_dx: float = 0.055
    hip_dx: float = 0.042
    root: tuple[float, float] = (0.5, 0.56)
    # non-animated keypoints, pinned to static offsets from their parent joint
    face_offsets: dict = field(
        default_factory=lambda: {
            R_EYE: (0.012, -0.010),
            L_EYE: (-0.012, -0.010),
            R_EAR: (0.026, 0.002),
            L_EAR: (-0.026, 0.002),
        }
    )
    foot_offsets: dict = field(
        default_factory=lambda: {
            "big_toe": (0.045, 0.012),
            "small_toe": (0.058, 0.016),
            "heel": (-0.014, 0.014),
        }
    )

    def project(self, angles: dict[str, np.ndarray]) -> np.ndarray:
        """Forward kinematics for T frames of joint angles -> (T, 25, 2)."""

        def track(name):
            return np.asarray(angles.get(name, 0.0), dtype=np.float64)

        t = max(np.size(track(name)) for name in angles) if angles else 1
        kp = np.zeros((t, N_KEYPOINTS, 2))

        def broad(name):
            return np.broadcast_to(track(name), (t,))

        root_x = self.root[0] + broad("root_x")
        root_y = self.root[1] + broad("root_y")
        lean = broad("lean")

        kp[:, MID_HIP, 0] = root_x
        kp[:, MID_HIP, 1] = root_y
        neck_x = root_x + self.torso * np.sin(lean)
        neck_y = root_y - self.torso * np.cos(lean)
        kp[:, NECK, 0] = neck_x
        kp[:, NECK, 1] = neck_y
        nose_x = neck_x + self.head * np.sin(lean)
        nose_y = neck_y - self.head * np.cos(lean)
        kp[:, NOSE, 0] = nose_x
        kp[:, NOSE, 1] = nose_y
        for idx, (dx, dy) in self.face_offsets.items():
            kp[:, idx, 0] = nose_x + dx
            kp[:, idx, 1] = nose_y + dy

        for side, shoulder, elbow, wrist, sgn in (
            ("r", R_SHOULDER, R_ELBOW, R_WRIST, 1.0),
            ("l", L_SHOULDER, L_ELBOW, L_WRIST, -1.0),
        ):
            sx = neck_x + sgn * self.shoulder_dx
            sy = neck_y + 0.01
            sigma = broad(f"shoulder_{side}")
            eps = broad(f"elbow_{side}")
            ex = sx + self.upper_arm * np.sin(sigma)
            ey = sy + self.upper_arm * np.cos(sigma)
            wx = ex + self.forearm * np.sin(sigma + eps)
            wy = ey + self.forearm * np.cos(sigma + eps)
            kp[:, shoulder, 0], kp[:, shoulder, 1] = sx, sy
            kp[:, elbow, 0], kp[:, elbow, 1] = ex, ey
            kp[:, wrist, 0], kp[:, wrist, 1] = wx, wy

        feet = {
            "r": (R_HIP, R_KNEE, R_ANKLE, R_BIG_TOE, R_SMALL_TOE, R_HEEL, 1.0),
            "l": (L_HIP, L_KNEE, L_ANKLE, L_BIG_TOE, L_SMALL_TOE, L_HEEL, -1.0),
        }
        for side, (hip, knee, ankle, big, small, heel, sgn) in feet.items():
            hx = root_x + sgn * self.hip_dx
            hy = root_y + 0.005
            phi = broad(f"hip_{side}")
            kappa = broad(f"knee_{side}")
            kx = hx + self.thigh * np.sin(phi)
            ky = hy + self.thigh * np.cos(phi)
            ax = kx + self.shank * np.sin(phi - kappa)
            ay = ky + self.shank * np.cos(phi - kappa)
            kp[:, hip, 0], kp[:, hip, 1] = hx, hy
            kp[:, knee, 0], kp[:, knee, 1] = kx, ky
            kp[:, ankle, 0], kp[:, ankle, 1] = ax, ay
            for joint, key in ((big, "big_toe"), (small, "small_toe"), (heel, "heel")):
                dx, dy = self.foot_offsets[key]
                kp[:, joint, 0] = ax + dx
                kp[:, joint, 1] = ay + dy

        return np.clip(kp, 0.0, 1.0)
