"""smstrack: self-hosted SMS-only GPS fleet tracking.

Core pieces: the locator SMS codec, device registry, energy-aware scheduler,
SMS gateway, position pipeline, embedded durable store, a calibrated fleet
simulator, and a FastAPI control plane tying them together.
"""

__version__ = "0.1.0"
