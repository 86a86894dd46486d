"""How the translated force makes the second arm yield with the first.

A wrench pushing on arm 1 shows up as a joint-torque residual. Its estimate is
mapped back to a TCP wrench and applied through arm 2's Jacobian, so arm 2
feels the same push in task space whatever its posture.

    python demos/wrench_copy.py
"""

import numpy as np

from bimanual_cmp.controllers import end_effector_force_estimate, virtual_force_translation
from bimanual_cmp.harness.config import builtin_config, load_robot_model
from bimanual_cmp.kinematics import fk_and_jacobian

np.set_printoptions(precision=4, suppress=True)
arm = load_robot_model(builtin_config("lwr4.ini"))
q1 = np.array([-0.35, -0.8, 0.0, 1.3, 0.0, -1.0, 0.0])
q2 = np.array([0.6, -0.4, 0.3, 1.6, -0.5, -0.7, 0.4])
_, J1 = fk_and_jacobian(arm, q1)
_, J2 = fk_and_jacobian(arm, q2)

push = np.array([0.0, 25.0, 0.0, 0.0, 0.0, 0.0])
residual = J1.T @ push  # what the torque sensors of arm 1 report beyond the command
print("joint residual on arm 1 [Nm]:", residual)
print("estimated wrench on arm 1:   ", end_effector_force_estimate(J1, residual))

tau = virtual_force_translation(J1, J2, residual, np.zeros(7))
print("torque applied to arm 2 [Nm]:", tau[7:])
print("wrench it produces at TCP 2: ", np.linalg.pinv(J2).T @ tau[7:])
