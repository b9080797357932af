"""Simulator and numerical verifier for entanglement-transfer bit commitment.

Subpackages: spacetime geometry, a dense labelled-qubit engine, closed-form
security bounds with spectral verification, a causal message-passing
simulator with custody tracking, the two protocol state machines, noise
channels, cheating strategies, and a CLI front end.
"""

__version__ = "0.1.0"
