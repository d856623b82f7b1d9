"""Two-user MISO broadcast channel with delayed CSIT.

End-to-end simulation of the MAT, Alternative MAT and TDMA transmission
schemes, closed-form Chernoff bounds on their average pairwise error
probabilities (i.i.d. and transmit-correlated Rayleigh fading), asymptotic
diversity-multiplexing tradeoff curves, and gradient-based optimization of
nonlinear signal constellations under statistical channel knowledge.
"""

__version__ = "0.1.0"
