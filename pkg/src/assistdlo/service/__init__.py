"""Teleop service: FastAPI app, wire models, and the real-time session loop."""

from .server import TeleopService, create_app, serve  # noqa: F401
