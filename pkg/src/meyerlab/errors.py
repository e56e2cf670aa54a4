"""Exception types shared across the package."""


class MeyerlabError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(MeyerlabError):
    """Operands live in different ambient dimensions."""


class SingularBasis(MeyerlabError):
    """Basis matrix is singular below the relative tolerance 1e-9."""


class RegionTooLarge(MeyerlabError):
    """Requested enumeration exceeds the candidate budget."""


class EmptyPatch(MeyerlabError):
    """Operation needs at least one point."""


class RadiusExceedsValidity(MeyerlabError):
    """Requested truncation radius exceeds the box where the input is complete."""


class ExtentTooSmall(MeyerlabError):
    """Query region is not covered by the patch extent."""


class NotAReturnTime(MeyerlabError):
    """Lattice point does not map the transversal point back into the window."""


class WindowTooSmall(MeyerlabError):
    """Window (or its eroded interior) has no volume left."""


class InjectivityViolated(MeyerlabError):
    """A sampling box assumed injective produced multiple return-time hits."""


class NoHits(MeyerlabError):
    """Recurrence search found no lattice point in the requested range."""


class ConfigError(MeyerlabError):
    """Experiment configuration is malformed."""
