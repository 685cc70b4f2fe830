"""graspcascade: task-divided 6-DOF grasp learning in a kinematic simulator.

The library is organized around seven pieces: arm kinematics, the simulated
grasping world, the event-to-reward mapping with its adaptive schedule, the
GAIL + PPO learning stack with the task cascade controller, demonstration
recording/storage, a browser teleoperation server, and the experiment CLI.
"""

__version__ = "0.1.0"
