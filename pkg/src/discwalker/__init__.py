"""Planar biped with a reaction disc: modelling, gait design, control and analysis."""
from .controller import Gains
from .dynamics import RobotParams, State
from .gait import GaitRequest, GaitSpec, design_gait, load_gait, save_gait

__all__ = ["Gains", "RobotParams", "State", "GaitRequest", "GaitSpec", "design_gait", "load_gait", "save_gait"]
__version__ = "0.1.0"
