"""Physics-informed neural network solver for coupled single-phase and
two-phase poroelasticity, with simultaneous and sequential (fixed-stress /
fixed-strain) training strategies."""

__version__ = "0.1.0"
