"""Procedural desk-scale motion generators on the 8-joint toy skeleton.

Three actions are produced in closed form:
  wave   standing figure, one arm angle exactly sinusoidal
  walk   inverted-pendulum gait: the stance leg sweeps linearly while the
         root advances so the stance foot stays planted (zero horizontal
         speed by construction); the swing leg overshoots to lift its foot;
         root speed is therefore tied to the leg-swing amplitude
  squat  periodic leg splay with the root lowered to keep feet grounded

All angles stay within (-pi, pi) and rotations are about the z axis only,
so the clips are twist-free and exactly recoverable by joints_to_lie.
"""

from dataclasses import dataclass

import numpy as np

from .. import skeletons
from ..kinematics import LieMotion, fk_motion
from .motiondata import MotionClip, MotionDataset, UnknownAction

TOY = skeletons.preset("toy8")
LEG_LEN = float(TOY.bone_lengths[6])  # l_foot bone

# lie rows on toy8 (bone rows are child joint index - 1)
ROW_BELLY, ROW_CHEST, ROW_HEAD = 0, 1, 2
ROW_L_ARM, ROW_R_ARM = 3, 4
ROW_L_LEG, ROW_R_LEG = 5, 6

ARM_BASE = 2.2  # hanging arms, +/- about z
LEG_BASE = -np.pi / 2  # legs straight down

BASE_ANGLES = np.array(
    [np.pi / 2, 0.0, 0.0, ARM_BASE, -ARM_BASE, LEG_BASE, LEG_BASE]
)

FOOT_JOINTS = (6, 7)  # l_foot, r_foot
UP_AXIS = 1  # y is up


def _assemble_lie(lie, root_positions, noise_std, rng):
    """Build joints from per-bone lie vectors (T, 7, 3) and a root track."""
    t = lie.shape[0]
    if noise_std > 0:
        lie = lie + rng.normal(0.0, noise_std, size=lie.shape) * np.array(
            [0.0, 0.0, 1.0]
        )
        root_positions = root_positions + rng.normal(
            0.0, 0.01 * noise_std, size=root_positions.shape
        )
    motion = LieMotion(
        lie=lie,
        root_orientations=np.zeros((t, 3)),
        root_positions=root_positions,
        bone_lengths=TOY.bone_lengths,
    )
    return fk_motion(TOY, motion)


def _assemble(z_angles, root_positions, noise_std, rng):
    """Build joints from per-bone z angles (T, 7) and root track (T, 3)."""
    lie = np.zeros((z_angles.shape[0], 7, 3))
    lie[:, :, 2] = z_angles
    return _assemble_lie(lie, root_positions, noise_std, rng)


def wave_clip(frames, amp, cycles, phase, noise_std=0.0, rng=None):
    """Right-arm wave; the arm z angle is -ARM_BASE + amp*sin(phi_t)."""
    rng = rng or np.random.default_rng(0)
    t_axis = np.arange(frames)
    phi = phase + 2.0 * np.pi * cycles * t_axis / frames
    z = np.tile(BASE_ANGLES, (frames, 1))
    z[:, ROW_R_ARM] = -ARM_BASE + amp * np.sin(phi)
    root = np.zeros((frames, 3))
    root[:, UP_AXIS] = LEG_LEN
    return _assemble(z, root, noise_std, rng)


def _aim_bone(direction):
    """Zero-twist axis-angle rotating local +x onto a unit direction."""
    cos_a = np.clip(direction[0], -1.0, 1.0)
    axis = np.array([0.0, -direction[2], direction[1]])
    sin_a = np.linalg.norm(axis)
    if sin_a < 1e-12:
        return np.zeros(3) if cos_a > 0 else np.array([0.0, 0.0, np.pi])
    return np.arccos(cos_a) * axis / sin_a


def walk_clip(frames, swing, lift, half_period, phase, noise_std=0.0, rng=None):
    """Forward walk along +x with an exactly planted stance foot.

    Each half cycle (length ``half_period`` frames) one leg is stance and
    sweeps from +swing to -swing linearly; the root follows the closed form
    that keeps that foot stationary, so root speed is tied to the swing
    amplitude. The other leg returns along a smooth-step sweep (zero
    touchdown velocity) with an out-of-plane tilt up to ``lift`` radians
    for ground clearance, keeping the swing foot strictly above the floor
    away from the support transitions.
    """
    rng = rng or np.random.default_rng(0)
    tau = phase + np.arange(frames, dtype=np.float64)
    k = np.floor(tau / half_period).astype(int)
    s = tau / half_period - k
    stance = swing * (1.0 - 2.0 * s)
    smooth = 3.0 * s * s - 2.0 * s**3
    swing_ang = swing * (2.0 * smooth - 1.0)
    clearance = lift * np.sin(np.pi * s)
    left_is_stance = k % 2 == 0

    z = np.tile(BASE_ANGLES, (frames, 1))
    lie = np.zeros((frames, 7, 3))
    for t in range(frames):
        st_row, sw_row = (
            (ROW_L_LEG, ROW_R_LEG) if left_is_stance[t] else (ROW_R_LEG, ROW_L_LEG)
        )
        z[t, st_row] = LEG_BASE + stance[t]
        d_sw, xi = swing_ang[t], clearance[t]
        # swing-leg direction: planar sweep tilted out of plane by xi
        direction = np.array(
            [np.sin(d_sw), -np.cos(d_sw) * np.cos(xi), -np.cos(d_sw) * np.sin(xi)]
        )
        lie[t, sw_row] = _aim_bone(direction)
        z[t, sw_row] = np.nan  # filled from lie below
    arm = 0.4 * swing * np.sin(np.pi * tau / half_period)
    z[:, ROW_L_ARM] = ARM_BASE - arm
    z[:, ROW_R_ARM] = -ARM_BASE - arm

    root = np.zeros((frames, 3))
    root[:, 0] = 2.0 * LEG_LEN * np.sin(swing) * k + LEG_LEN * (
        np.sin(swing) - np.sin(stance)
    )
    root[:, 0] -= root[0, 0]
    root[:, UP_AXIS] = LEG_LEN * np.cos(stance)

    planar = np.zeros((frames, 7, 3))
    planar[:, :, 2] = np.where(np.isnan(z), 0.0, z)
    mask = np.isnan(z)
    lie = np.where(mask[:, :, None], lie, planar)
    return _assemble_lie(lie, root, noise_std, rng)


def squat_clip(frames, depth, arm_raise, cycles, phase, noise_std=0.0, rng=None):
    """Periodic squat: legs splay outward while the root drops to keep the
    feet grounded; both arms raise with the descent."""
    rng = rng or np.random.default_rng(0)
    t_axis = np.arange(frames)
    s = 0.5 * (1.0 - np.cos(phase + 2.0 * np.pi * cycles * t_axis / frames))
    z = np.tile(BASE_ANGLES, (frames, 1))
    z[:, ROW_L_LEG] = LEG_BASE + depth * s
    z[:, ROW_R_LEG] = LEG_BASE - depth * s
    z[:, ROW_L_ARM] = ARM_BASE - arm_raise * s
    z[:, ROW_R_ARM] = -ARM_BASE + arm_raise * s
    root = np.zeros((frames, 3))
    root[:, UP_AXIS] = LEG_LEN * np.cos(depth * s)
    return _assemble(z, root, noise_std, rng)


@dataclass(frozen=True)
class SyntheticSpec:
    actions: tuple = ("wave", "walk", "squat")
    clips_per_action: int = 100
    frames: int = 16
    fps: float = 12.0
    noise_std: float = 0.02
    n_subjects: int = 10


def synthesize(spec, seed):
    """Deterministic procedural dataset per ``spec`` (a SyntheticSpec)."""
    for action in spec.actions:
        if action not in ("wave", "walk", "squat"):
            raise UnknownAction(f"no procedural generator for action {action!r}")
    rng = np.random.default_rng(seed)
    clips = []
    for action in spec.actions:
        for _ in range(spec.clips_per_action):
            subject = int(rng.integers(spec.n_subjects))
            if action == "wave":
                joints = wave_clip(
                    spec.frames,
                    amp=rng.uniform(0.45, 0.8),
                    cycles=rng.uniform(0.8, 1.6),
                    phase=rng.uniform(0, 2 * np.pi),
                    noise_std=spec.noise_std,
                    rng=rng,
                )
            elif action == "walk":
                joints = walk_clip(
                    spec.frames,
                    swing=rng.uniform(0.25, 0.55),
                    lift=rng.uniform(0.3, 0.6),
                    half_period=float(rng.integers(4, 8)),
                    phase=rng.uniform(0, 8.0),
                    noise_std=spec.noise_std,
                    rng=rng,
                )
            else:
                joints = squat_clip(
                    spec.frames,
                    depth=rng.uniform(0.4, 0.7),
                    arm_raise=rng.uniform(0.5, 0.9),
                    cycles=rng.uniform(0.9, 1.6),
                    phase=rng.uniform(0, 0.6),
                    noise_std=spec.noise_std,
                    rng=rng,
                )
            clips.append(MotionClip(joints, action, subject, spec.fps))
    return MotionDataset(clips, TOY, tuple(spec.actions))


def foot_slide(joints, foot_joints=FOOT_JOINTS, up_axis=UP_AXIS, fps=1.0):
    """Mean horizontal speed of the stance foot (the lower one per frame).

    Frames where the stance assignment flips are support transitions and are
    excluded, as in standard foot-skate probes. Planted feet make the value
    ~0 on the synthetic walk data; root/pose mismatch in generated motions
    raises it.
    """
    joints = np.asarray(joints, dtype=np.float64)
    feet = joints[:, list(foot_joints), :]  # (T, F, 3)
    heights = feet[:, :, up_axis]
    stance = np.argmin(heights, axis=1)  # (T,)
    horiz = [a for a in range(3) if a != up_axis]
    speeds = []
    for t in range(1, joints.shape[0]):
        if stance[t] != stance[t - 1]:
            continue
        foot = stance[t]
        step = feet[t, foot][horiz] - feet[t - 1, foot][horiz]
        speeds.append(np.linalg.norm(step) * fps)
    return float(np.mean(speeds)) if speeds else 0.0
