"""Bimanual compliant movement primitives in simulation.

Two simulated 7-DOF arms track learned joint trajectories with low joint
stiffness. Learned feed-forward torques keep tracking accurate, a symmetric
task-space controller holds the arms' relative pose stiffly, and virtual
force translation lets both arms yield together to a push on either one.
"""

from .clik import ClikConfig, ClikConvergenceError, SingularConfigurationError, solve_trajectory
from .controllers import (ControllerVariant, GainSet, LowPassFilter, combined_feedforward,
                          end_effector_force_estimate, joint_impedance, symmetric_task_torque,
                          virtual_force_translation)
from .dynamics import Payload, forward_dynamics, inverse_dynamics, mass_matrix
from .kinematics import (Pose, RobotModel, axis_angle_from_rotation, damped_pseudo_inverse,
                         forward_kinematics, geometric_jacobian, rotation_about_axis, skew)
from .primitives import Cmp, Dmp, TorqueProfile, encode_dmp, encode_torques, integrate_dmp
from .simulation import PerturbationProfile, Plant, SimState, step
from .task_space import TaskCoordinates, TaskReference, bimanual_jacobian, task_coordinates, task_errors

__version__ = "0.1.0"

__all__ = [
    "ClikConfig", "ClikConvergenceError", "SingularConfigurationError", "solve_trajectory",
    "ControllerVariant", "GainSet", "LowPassFilter", "combined_feedforward", "end_effector_force_estimate",
    "joint_impedance", "symmetric_task_torque", "virtual_force_translation",
    "Payload", "forward_dynamics", "inverse_dynamics", "mass_matrix",
    "Pose", "RobotModel", "axis_angle_from_rotation", "damped_pseudo_inverse", "forward_kinematics",
    "geometric_jacobian", "rotation_about_axis", "skew",
    "Cmp", "Dmp", "TorqueProfile", "encode_dmp", "encode_torques", "integrate_dmp",
    "PerturbationProfile", "Plant", "SimState", "step",
    "TaskCoordinates", "TaskReference", "bimanual_jacobian", "task_coordinates", "task_errors",
]
