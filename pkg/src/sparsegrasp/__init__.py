"""Sparse grasp-pose networks trained with Edge-PopUp on a from-scratch autodiff engine."""

__version__ = "0.1.0"
