"""Desk-scale shared-autonomy teleoperation for deformable linear objects."""

__version__ = "0.1.0"
