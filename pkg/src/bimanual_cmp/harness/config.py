"""Structured-text configuration: robot model files and scenario files.

Both are INI files read with :mod:`configparser`. Matrices are written one
row per line, values separated by whitespace. The full key list lives in
``docs/config-reference.md``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..controllers import ControllerVariant, GainSet
from ..dynamics import Payload
from ..kinematics import LinkInertial, Pose, RobotModel, rot_x, rot_y, rot_z
from ..simulation import PerturbationProfile, PerturbationSegment

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "TrajectorySpec",
    "load_robot_model",
    "load_scenario",
    "parse_scenario",
    "default_scenario_path",
    "pose_from_xyzrpy",
]


class ConfigError(ValueError):
    pass


def _rows(text: str, width: int | None = None) -> np.ndarray:
    rows = [line.split() for line in text.strip().splitlines() if line.strip()]
    try:
        arr = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ConfigError(f"non-numeric matrix entry: {exc}") from None
    if width is not None and (arr.ndim != 2 or arr.shape[1] != width):
        raise ConfigError(f"expected rows of {width} values, got {arr.shape}")
    return arr


def _vector(text: str, size: int | None = None) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigError(f"non-numeric vector entry: {exc}") from None
    if size is not None and v.size != size:
        raise ConfigError(f"expected {size} values, got {v.size}")
    return v


def pose_from_xyzrpy(values) -> Pose:
    """Pose from ``x y z roll pitch yaw`` with ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
    x, y, z, roll, pitch, yaw = values
    return Pose([x, y, z], rot_z(yaw) @ rot_y(pitch) @ rot_x(roll))


def _parse_locked(text: str, n: int) -> dict:
    locked = {}
    for item in text.replace(",", " ").split():
        idx, _, angle = item.partition(":")
        k = int(idx) - 1
        if not 0 <= k < n:
            raise ConfigError(f"locked joint {idx} outside 1..{n}")
        locked[k] = float(angle) if angle else 0.0
    return locked


def _read(path_or_text) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        path = Path(path_or_text)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cp.read(path)
    else:
        cp.read_string(path_or_text)
    return cp


def load_robot_model(source, section: str = "robot") -> RobotModel:
    """Load a :class:`RobotModel` from an INI file path or INI text."""
    cp = _read(source)
    if section not in cp:
        raise ConfigError(f"missing [{section}] section")
    s = cp[section]
    dh = _rows(s["dh"], 4)
    n = dh.shape[0]
    inertia = _rows(s["inertia"], 10)
    if inertia.shape[0] != n:
        raise ConfigError(f"inertia has {inertia.shape[0]} rows for {n} joints")
    inertials = []
    for row in inertia:
        ixx, iyy, izz, ixy, ixz, iyz = row[4:]
        I = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        inertials.append(LinkInertial(row[0], row[1:4], I))
    limits = _rows(s["limits"], 2) if s.get("limits", "").strip() else None
    armature = _vector(s["armature"], n) if s.get("armature", "").strip() else None
    return RobotModel(
        dh=dh,
        inertials=tuple(inertials),
        base=pose_from_xyzrpy(_vector(s.get("base", "0 0 0 0 0 0"), 6)),
        tcp=pose_from_xyzrpy(_vector(s.get("tcp", "0 0 0 0 0 0"), 6)),
        joint_limits=limits,
        locked=_parse_locked(s.get("locked", ""), n),
        armature=armature,
        name=s.get("name", "arm"),
    )


def builtin_config(name: str) -> Path:
    return Path(str(resources.files("bimanual_cmp") / "configs" / name))


def default_scenario_path() -> Path:
    return builtin_config("default_scenario.ini")


@dataclass
class TrajectorySpec:
    """Absolute-task path plus constant relative offset.

    ``kind`` is ``minjerk`` (minimum-jerk blend between keyframes), ``line``
    (constant velocity between keyframes) or ``arc``. Keyframes are
    ``(t, dx, dy, dz)`` offsets of the absolute position from its start.
    """

    kind: str = "minjerk"
    keyframes: np.ndarray = field(default_factory=lambda: np.array([[0.0, 0, 0, 0]]))
    arc_center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    arc_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    arc_angle: float = 0.0
    relative_offset: np.ndarray = field(default_factory=lambda: np.array([0.0, -0.6, 0.0]))


@dataclass
class ScenarioConfig:
    robots: tuple
    posture: tuple
    trajectory: TrajectorySpec
    duration: float
    dt: float
    gains: GainSet
    stiff_gains: GainSet
    variant: ControllerVariant
    perturbation: PerturbationProfile
    payloads: tuple
    seed: int = 0
    torque_noise: float = 0.0
    joint_friction: float = 0.1
    filter_cutoff: float = 20.0
    n_kernels: int = 25
    n_torque_kernels: int = 40
    alpha_z: float = 48.0
    alpha_x: float = 2.0
    clik_gain: float = 10.0
    clik_posture_gain: float = 0.0
    clik_tol: float = 1e-4
    learn_iterations: int = 4
    learn_tol: float = 1e-3
    fdyn_sign: float = 1.0
    vft_sign: float = -1.0
    output_dir: Path = Path("out")
    source: Path | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if len(self.robots) != 2:
            raise ConfigError("exactly two robots are required")

    @property
    def ticks(self) -> int:
        return int(round(self.duration / self.dt))

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def _gainset(s, prefix: str, n_total: int, fallback=None) -> GainSet:
    def vec(key, size, default):
        text = s.get(f"{prefix}{key}", "").strip()
        if not text:
            return default
        v = _vector(text)
        if v.size == 1:
            v = np.full(size, v[0])
        if v.size == size // 2 and size == n_total:
            v = np.concatenate([v, v])
        if v.size != size:
            raise ConfigError(f"{prefix}{key}: expected {size} values, got {v.size}")
        return v

    base = fallback or GainSet.zeros(n_total)
    K_task = vec("k_task", 12, base.K_task)
    D_text = s.get(f"{prefix}d_task", "").strip()
    D_task = GainSet.critical_task_damping(K_task) if D_text in ("", "auto") else vec("d_task", 12, None)
    return GainSet(
        K_q=vec("k_q", n_total, base.K_q),
        D_q=vec("d_q", n_total, base.D_q),
        K_task=K_task,
        D_task=D_task,
        K_s1=vec("k_s1", n_total, base.K_s1),
    )


def _perturbation(s) -> PerturbationProfile:
    robot = s.getint("robot", 1) - 1
    segments = []
    for line in s.get("segments", "").strip().splitlines():
        parts = line.split()
        if not parts:
            continue
        kind = parts[0]
        vals = [float(v) for v in parts[1:]]
        if kind in ("ramp", "hold", "zero"):
            if len(vals) != 8 and not (kind == "zero" and len(vals) == 2):
                raise ConfigError(f"segment '{line}': expected t0 t1 + 6 wrench values")
            t0, t1 = vals[:2]
            w = np.array(vals[2:8]) if len(vals) == 8 else np.zeros(6)
            segments.append(PerturbationSegment(kind, t0, t1, w))
        elif kind == "release":
            t0, t1 = vals[:2]
            segments.append(PerturbationSegment("release", t0, t1, np.array(vals[2:8])))
        elif kind == "sine":
            if len(vals) != 9:
                raise ConfigError(f"segment '{line}': sine needs t0 t1 freq + 6 amplitudes")
            t0, t1, freq = vals[:3]
            segments.append(PerturbationSegment("sine", t0, t1, np.array(vals[3:9]), freq))
        else:
            raise ConfigError(f"unknown perturbation segment kind '{kind}'")
    cap = s.getfloat("cap", 100.0)
    return PerturbationProfile(robot=robot, segments=tuple(segments), cap=cap)


def parse_scenario(source, base_dir: Path | None = None) -> ScenarioConfig:
    cp = _read(source)
    path = Path(source) if isinstance(source, (str, Path)) and "\n" not in str(source) else None
    base_dir = base_dir or (path.parent if path else Path.cwd())
    for sec in ("scenario", "robot1", "robot2", "trajectory", "gains"):
        if sec not in cp:
            raise ConfigError(f"missing [{sec}] section")
    sc = cp["scenario"]

    robots, postures, payloads = [], [], []
    for sec_name in ("robot1", "robot2"):
        r = cp[sec_name]
        model_ref = r.get("model", "lwr4.ini")
        model_path = base_dir / model_ref
        if not model_path.exists():
            model_path = builtin_config(model_ref)
        if not model_path.exists():
            raise ConfigError(f"robot model '{model_ref}' not found")
        model = load_robot_model(model_path)
        model = model.with_base(pose_from_xyzrpy(_vector(r.get("base", "0 0 0 0 0 0"), 6)))
        if r.get("locked", "").strip():
            model = model.with_locked(_parse_locked(r["locked"], model.joint_count))
        robots.append(model)
        postures.append(model.apply_locks(_vector(r["posture"], model.joint_count)))
        payloads.append(Payload(r.getfloat("payload_mass", 0.0),
                                _vector(r.get("payload_com", "0 0 0"), 3)))
    n_total = sum(m.joint_count for m in robots)

    t = cp["trajectory"]
    traj = TrajectorySpec(
        kind=t.get("kind", "minjerk").strip(),
        keyframes=_rows(t.get("keyframes", "0 0 0 0"), 4),
        arc_center=_vector(t.get("arc_center", "0 0 0"), 3),
        arc_axis=_vector(t.get("arc_axis", "0 0 1"), 3),
        arc_angle=t.getfloat("arc_angle", 0.0),
        relative_offset=_vector(t.get("relative_offset", "0 -0.6 0"), 3),
    )
    if traj.kind not in ("minjerk", "line", "arc"):
        raise ConfigError(f"unknown trajectory kind '{traj.kind}'")

    gains = _gainset(cp["gains"], "", n_total)
    stiff = _gainset(cp["gains"], "stiff_", n_total, fallback=gains)
    perturbation = (_perturbation(cp["perturbation"]) if "perturbation" in cp
                    else PerturbationProfile(robot=0, segments=()))

    learn = cp["learning"] if "learning" in cp else {}
    sim = cp["simulation"] if "simulation" in cp else {}
    ctl = cp["controller"] if "controller" in cp else {}

    def get(sec, key, default, conv=float):
        return conv(sec[key]) if key in sec and str(sec[key]).strip() else default

    return ScenarioConfig(
        robots=tuple(robots),
        posture=tuple(postures),
        trajectory=traj,
        duration=sc.getfloat("duration", 30.0),
        dt=sc.getfloat("dt", 0.002),
        gains=gains,
        stiff_gains=stiff,
        variant=ControllerVariant.parse(sc.get("variant", "Entire")),
        perturbation=perturbation,
        payloads=tuple(payloads),
        seed=sc.getint("seed", 0),
        torque_noise=get(sim, "torque_noise", 0.0),
        joint_friction=get(sim, "joint_friction", 0.1),
        filter_cutoff=get(ctl, "filter_cutoff", 20.0),
        fdyn_sign=get(ctl, "fdyn_sign", 1.0),
        vft_sign=get(ctl, "vft_sign", -1.0),
        n_kernels=get(learn, "kernels", 25, int),
        n_torque_kernels=get(learn, "torque_kernels", 40, int),
        alpha_z=get(learn, "alpha_z", 48.0),
        alpha_x=get(learn, "alpha_x", 2.0),
        clik_gain=get(learn, "clik_gain", 10.0),
        clik_posture_gain=get(learn, "clik_posture_gain", 0.0),
        clik_tol=get(learn, "clik_tol", 1e-4),
        learn_iterations=get(learn, "iterations", 4, int),
        learn_tol=get(learn, "tracking_tol", 1e-3),
        output_dir=Path(sc.get("output", "out")),
        source=path,
    )


def load_scenario(path=None) -> ScenarioConfig:
    """Load a scenario file; ``None`` loads the bundled default scenario.

    A bare file name that does not exist locally is looked up among the
    bundled configs.
    """
    if path is None:
        return parse_scenario(default_scenario_path())
    path = Path(path)
    if not path.exists() and path.parent == Path(".") and builtin_config(path.name).exists():
        path = builtin_config(path.name)
    return parse_scenario(path)
