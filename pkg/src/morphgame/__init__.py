"""Coordinated wingspan-morphing and flight control for a variable-span aircraft.

Offline: a shared dynamics representation is learned with adversarial
meta-learning and a classifier maps dynamics to morph ratio. Online: a
two-player Nash game is solved through coupled state-dependent Riccati
equations by Lyapunov iterations.
"""

__version__ = "0.1.0"
