"""A tour of the geometric pieces: rotations, the skeleton, objects and contact labels.

Run with ``python demos/01_bodies_and_contacts.py``.
"""
# %%
import numpy as np

from hoidiff.body import N_BODY_POINTS, ObjectFrame, body_points, compute_contacts, fk, load_skeleton
from hoidiff.canon import Anchor, canonicalize, ego_condition, head_pose
from hoidiff.geom import axis_rotation, matrix_to_quat, matrix_to_rot6, rot6_to_matrix
from hoidiff.scenarios import ScenarioConfig, gen_scenario

np.set_printoptions(precision=3, suppress=True)

# %% 6D rotations keep the first two columns; Gram-Schmidt restores the third.
r = axis_rotation("z", np.pi / 3) @ axis_rotation("x", 0.4)
six = matrix_to_rot6(r)
print("6D:", six)
print("round trip error:", np.abs(rot6_to_matrix(six) - r).max())
print("quaternion (w >= 0):", matrix_to_quat(r))

# A sloppy 6D vector still decodes to a proper rotation.
m = rot6_to_matrix([2.0, 0.1, 0.0, 0.3, 1.0, 0.2])
print("det:", np.linalg.det(m), "orthogonality error:", np.abs(m.T @ m - np.eye(3)).max())

# %% The skeleton: 22 joints, z up, feet on the floor in the rest pose.
skel = load_skeleton()
print(len(skel.names), "joints; head at", skel.names.index("head"))

# %% A synthetic carry: walk up, grab, carry, put down.
seq = gen_scenario(ScenarioConfig(scenario="carry", frames=120, seed=3), skel)
joints = fk(skel, seq.human)
print("frames:", len(seq), "object class:", seq.template.class_id)
print("head height over time (m):", joints[::20, skel.index("head"), 2])

# %% Contacts: 64 body points near the object plus 4 foot-floor labels.
body = seq.contacts[:, :N_BODY_POINTS].sum(1)
feet = seq.contacts[:, N_BODY_POINTS:].sum(1)
print("touching body points per frame:", body[::10])
print("grounded foot joints per frame: ", feet[::10])
again = compute_contacts(skel, seq.human[60], seq.template, ObjectFrame(seq.obj[60]))
print("labels recomputed from geometry agree:", np.array_equal(again, seq.contacts[60]))
print("body points at frame 60:", body_points(skel, seq.human[60]).shape)

# %% Head-centric canonicalization: the window frame follows the head's heading, not its tilt.
anchor = Anchor.from_head(head_pose(skel, seq.human[0]))
root = canonicalize(anchor, seq.human.root)
print("canonical root at frame 0:", root.trans[0])
ego = ego_condition(skel, seq.human, anchor)
print("ego conditioning:", ego.shape, "(head/wrist rotations, rotation rates, positions, velocities)")
