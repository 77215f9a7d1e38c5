"""Exception types and validation diagnostics shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, field


class FusionlabError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(FusionlabError):
    """Operands have incompatible shapes."""


class NonPhysicalInput(FusionlabError):
    """A state/effect pair produced a value outside physical range."""


class NotHermitian(FusionlabError):
    """Matrix expected to be Hermitian is not."""


class NotInvolutory(FusionlabError):
    """Observable expected to square to the identity does not."""


class UnknownNode(FusionlabError):
    """Referenced node does not exist in the scenario."""


class AlreadyInterrupted(FusionlabError):
    """The node already has a setting counterpart."""


class UnknownAxis(FusionlabError):
    """Referenced table axis does not exist."""


class MissingRegime(FusionlabError):
    """Bundle lacks a table required by the operation."""


class WrongCardinality(FusionlabError):
    """Operation requires different variable cardinalities."""


class NotNormalized(FusionlabError):
    """Distribution does not sum to one within tolerance."""


class UnknownProtocol(FusionlabError):
    """Protocol id is not one of the shipped protocols."""


class OutOfRange(FusionlabError):
    """Numeric parameter outside its admissible interval."""


class InvalidModel(FusionlabError):
    """Quantum or classical causal model violates its invariants."""


class NonPhysicalProbability(FusionlabError):
    """Generated probability fell below the negativity tolerance."""


class WrongTopology(FusionlabError):
    """Scenario topology unsupported by the chosen solver."""


class DegenerateBundle(FusionlabError):
    """Bundle/table selection is empty or unusable."""


class BadCardinality(FusionlabError):
    """Requested latent cardinalities unsupported by the solver."""


class SizeLimit(FusionlabError):
    """Problem size exceeds the configured variable cap."""


class ZeroConditioningEvent(FusionlabError):
    """Conditioning event has zero probability."""


class NonMonotoneOrBudget(FusionlabError):
    """Threshold search hit an Unknown verdict or non-monotone probes."""


@dataclass
class ValidationResult:
    """Outcome of a structural validation pass.

    ``failures`` holds one human-readable message per violated property,
    each prefixed with the property name (e.g. ``"psd: min eigenvalue ..."``).
    """

    ok: bool
    failures: list[str] = field(default_factory=list)

    def raise_if_failed(self, exc: type[FusionlabError] = InvalidModel) -> None:
        if not self.ok:
            raise exc("; ".join(self.failures))

    @staticmethod
    def collect(failures: list[str]) -> "ValidationResult":
        return ValidationResult(ok=not failures, failures=failures)
