"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations

from enum import Enum


class TutorkitError(Exception):
    """Base class for all domain errors raised by this package."""


# --- corpus ingestion ---------------------------------------------------


class EmptySection(TutorkitError):
    """A textbook section contained only whitespace."""


class DuplicateSectionId(TutorkitError):
    """Two textbook sections share the same section id."""


class UnsortedSegments(TutorkitError):
    """Transcript segments were not sorted by start time."""


class NegativeTimestamp(TutorkitError):
    """A transcript segment carried a negative start time."""


class MissingDescription(TutorkitError):
    """An assignment was ingested without a description file."""


# --- embedding / providers ----------------------------------------------


class ProviderUnavailable(TutorkitError):
    """A model provider kept failing after the configured retries."""


class EmptyText(TutorkitError):
    """Text submitted for embedding was empty."""


class DimensionMismatch(TutorkitError):
    """Vectors (or a provider's outputs) disagree on dimensionality."""


class ModelMismatch(TutorkitError):
    """Vectors produced by different embedding models were compared."""


class ZeroNormVector(TutorkitError):
    """Cosine similarity is undefined for a zero-norm vector."""


class EmptyCompletion(TutorkitError):
    """A chat provider returned an empty assistant message."""


# --- vector index --------------------------------------------------------


class HeterogeneousVectors(TutorkitError):
    """Index entries mix embedding models or dimensions."""


class EmptyIndex(TutorkitError):
    """An index cannot be built from zero entries."""


class CorruptIndexFile(TutorkitError):
    """An index file failed its checksum or structural validation."""


# --- generation / parsing ------------------------------------------------


class UnparseableModelOutput(TutorkitError):
    """A model reply could not be parsed into the expected structure."""


class MissingRequiredFile(TutorkitError):
    """A coding-QA strategy is missing one of its required input files."""


class UnparseableVerdict(TutorkitError):
    """A judge reply could not be parsed into a verdict."""


# --- inquiry pipeline ----------------------------------------------------


class PipelineStage(str, Enum):
    """Stage labels used to attribute inquiry failures."""

    EXPERT = "expert"
    RETRIEVAL = "retrieval"
    SYNTHESIS = "synthesis"


class PipelineStageError(TutorkitError):
    """Wraps a failure from one stage of the inquiry pipeline."""

    def __init__(self, stage: PipelineStage, cause: Exception):
        super().__init__(f"{stage.value} stage failed: {cause}")
        self.stage = stage
        self.cause = cause
