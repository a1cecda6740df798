"""Reducibility of quasi-periodically forced Schrodinger operators by KAM iteration."""

from .engine import ReductionResult, ReductionSettings, TransformChain, kam_step, run
from .exceptions import (ArtifactError, BoundViolation, ConfigError, EmptyRetainedSet,
                         HermiticityError, IntegratorError, InversionError, KAMError,
                         NoConvergence, ResonanceViolation, ScheduleError,
                         UnderResolvedPotential, VerificationFailed)
from .homological import DiagonalFrequencies, diagonal_update, solve_homological
from .measure import ParamSet, divisor_function, excise
from .potential import (PotentialSpec, assemble_R, coupling_coefficient, desk_potential,
                        diophantine_check)
from .schedule import IterationSchedule
from .transform import build_transform, conjugate_oracle

__version__ = "0.1.0"
