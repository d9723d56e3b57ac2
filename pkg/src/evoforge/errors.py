"""Exception hierarchy for the evoforge pipeline.

Two families matter to callers: InputError (bad or missing staged data,
CLI exit code 2) and BackendError (model endpoint or toolchain trouble,
CLI exit code 3).
"""

from __future__ import annotations


class EvoForgeError(Exception):
    """Base class for all evoforge-specific failures."""


class InputError(EvoForgeError):
    """Staged input is missing, malformed, or violates a precondition."""


class BackendError(EvoForgeError):
    """An external backend (model endpoint, toolchain sandbox) failed."""


class MalformedVersion(InputError):
    """Version string is not a MAJOR.MINOR.PATCH numeric triple."""


class EmptyDataset(InputError):
    """An aggregate was requested over zero records."""


class MalformedDocFile(InputError):
    """A documentation fixture file violates the fixture dialect."""


class EmptyTree(InputError):
    """A documentation tree directory yielded no parseable items."""


class VersionOrderError(InputError):
    """A version pair was given out of order (old must precede new)."""


class ParseFailure(InputError):
    """A source snapshot yielded no recognizable items."""


class InsufficientCandidates(InputError):
    """Fewer control-set candidates exist than were requested."""


class LineOutOfRange(InputError):
    """A hit line lies outside the file it supposedly came from."""


class MalformedManifest(InputError):
    """A package manifest could not be parsed or holds a bad requirement."""


class InsufficientSamples(InputError):
    """An outcome set has fewer samples per task than the requested k."""


class UnknownVersionDate(InputError):
    """A version has no entry in the release-date table."""


class IndexConflict(InputError):
    """Two knowledge-base documents claim the same change record."""


class MissingInput(InputError):
    """A staged file or directory named by the configuration is absent."""

    def __init__(self, path: str, hint: str = "") -> None:
        self.path = path
        message = f"missing input: {path}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)


class SchemaMismatch(InputError):
    """A report or config file lacks required fields or has unknown ones."""


class GenerationExhausted(BackendError):
    """A generation stage ran out of retries without a usable output."""


class JudgeUnparseable(BackendError):
    """The judge reply did not start with a recognizable verdict line."""


class SandboxUnavailable(BackendError):
    """No working toolchain sandbox is available for compile checks."""


class ModelUnavailable(BackendError):
    """The configured model endpoint could not be reached or refused."""
