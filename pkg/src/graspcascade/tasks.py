"""The three sub-motions the grasp is divided into.

Ordered: align the hand with the grasp direction, move onto the grasp
point while staying aligned, close the hand. Semantically the first two
form the "approach" segment and the third the "grab" segment.
"""

from enum import IntEnum


class TaskId(IntEnum):
    TASK1 = 1   # face the hand along the predetermined grasp direction
    TASK2 = 2   # reach the grasp point while keeping the Task 1 constraint
    TASK3 = 3   # close the hand at the grasp point

    @property
    def successor(self) -> "TaskId | None":
        return TaskId(self.value + 1) if self.value < 3 else None


ALL_TASKS = (TaskId.TASK1, TaskId.TASK2, TaskId.TASK3)
