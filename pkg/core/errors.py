"""
Exceptions raised across the library
"""

from typing import Optional


class EvolutionError(Exception):
    """Base class of every error raised by this package"""


class EmptyPopulation(EvolutionError):
    """Selection was requested from a population with no members"""


class PopulationKindError(EvolutionError):
    """A solution was routed to a population of the other feasibility"""


class InvalidGenome(EvolutionError):
    """The domain could not decode a genome"""


class InvalidStructure(EvolutionError):
    """A phenotype has no blocks to measure"""


class GenomeMismatch(EvolutionError):
    """Two genomes of different lengths were recombined"""


class NotInfeasible(EvolutionError):
    """Infeasible fitness was requested for a solution with no violations"""


class EmptyRun(EvolutionError):
    """A generation was stepped with both populations empty"""


class InitFailure(EvolutionError):
    """Initialization exhausted its budget without producing any solution"""


class IgnoredEvent(EvolutionError):
    """An offspring event from a feasible parent reached the ledger; not fatal"""


class NoOffspringYet(EvolutionError):
    """A ledger entry has no recorded children"""


class NoData(EvolutionError):
    """The surrogate was asked to train on an empty example list"""


class FeatureDimError(EvolutionError):
    """Feature vector length does not match the surrogate input dimension"""


class InvalidBehavior(EvolutionError):
    """A behavior descriptor has non-finite components"""


class EmptyGrid(EvolutionError):
    """An emitter was asked to choose from a grid with no solutions"""


class BanditError(EvolutionError):
    """Bandit update for an arm other than the last selected one"""


class SeedMismatch(EvolutionError):
    """Summaries being compared were produced from different seed sets"""


class ConfigError(EvolutionError):
    """Invalid experiment configuration"""

    def __init__(self, message: str, field_path: Optional[str] = None):
        self.field_path = field_path
        prefix = f"{field_path}: " if field_path else ""
        super().__init__(f"{prefix}{message}")
