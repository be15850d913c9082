"""
Error taxonomy for the infilling-sphere pipeline.

Every failure raised by the library derives from InSphereError and belongs to
one of three categories. The category decides the CLI exit code:

- UserError (1): bad paths, bad configuration, unsupported options
- DataError (2): unreadable meshes, corrupt caches, empty datasets
- InvariantViolation (3): internal contract broken (e.g. diverged training)
"""

from enum import IntEnum


class ExitCode(IntEnum):
    """Process exit codes used by main.py."""
    SUCCESS = 0
    USER_ERROR = 1
    DATA_ERROR = 2
    INTERNAL_ERROR = 3


class InSphereError(Exception):
    """Base exception for all pipeline errors."""

    exit_code: ExitCode = ExitCode.INTERNAL_ERROR


class UserError(InSphereError):
    """Invalid user input: paths, flags, configuration values."""

    exit_code = ExitCode.USER_ERROR


class DataError(InSphereError):
    """Input data or cached artifacts cannot be used."""

    exit_code = ExitCode.DATA_ERROR


class InvariantViolation(InSphereError):
    """An internal invariant does not hold."""

    exit_code = ExitCode.INTERNAL_ERROR


# ============================================================================
# Data errors
# ============================================================================

class ParseError(DataError):
    """Raised when an OFF file (or other text input) is malformed."""
    pass


class EmptyMesh(DataError):
    """Raised when a mesh has no faces."""
    pass


class DegenerateMesh(DataError):
    """Raised when a mesh has zero extent on every axis."""
    pass


class EmptyGrid(DataError):
    """Raised when a voxel grid has no occupied voxel (no surface, no SDF)."""
    pass


class NoCandidates(DataError):
    """Raised when the requested side of an SDF grid has no eligible voxel."""
    pass


class CacheCorrupt(DataError):
    """Raised when a cached binary artifact cannot be decoded."""
    pass


class EmptyDataset(DataError):
    """Raised when a dataset root yields fewer than two classes or no meshes."""
    pass


class ConfigMismatch(DataError):
    """Raised when a cache was produced under a different pipeline config hash."""
    pass


# ============================================================================
# User errors
# ============================================================================

class ResolutionTooLarge(UserError):
    """Raised when R³ exceeds the configured memory cap or an oracle's limit."""
    pass


class UnsupportedFormat(UserError):
    """Raised when an export format is not ply or obj."""
    pass


class ShapeMismatch(UserError):
    """Raised when a network input does not have shape B×n×input_dim."""
    pass


class UnknownNetConfig(UserError):
    """Raised when a network preset name is not registered."""
    pass


# ============================================================================
# Invariant violations
# ============================================================================

class DivergedTraining(InvariantViolation):
    """Raised when the training loss becomes NaN or infinite."""
    pass
