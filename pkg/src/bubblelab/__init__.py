"""Numerical lab for the reduced energy of clustered bubbles near a flat critical hypersurface."""

from .config import (AsymptoticRegime, BubbleParams, Box, Configuration, CurvatureModel, InfeasibleRegimeError,
                     OutOfTubeError, gen_circle_configuration, gen_random_separated, load_configuration,
                     save_configuration, validate_configuration)
from .constants import ConstantTable, build_table, check_identities
from .quadrature import QuadratureError, QuadratureSpec

__all__ = ["AsymptoticRegime", "BubbleParams", "Box", "Configuration", "CurvatureModel", "InfeasibleRegimeError",
           "OutOfTubeError", "gen_circle_configuration", "gen_random_separated", "load_configuration",
           "save_configuration", "validate_configuration", "ConstantTable", "build_table", "check_identities",
           "QuadratureError", "QuadratureSpec"]
