"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures to process status without inspecting messages:
1 = bad input, 2 = invariant violation, 3 = I/O failure.
"""

from __future__ import annotations


class CorpusForgeError(Exception):
    exit_code = 1


class InputError(CorpusForgeError, ValueError):
    """Input data or arguments that cannot be processed."""

    exit_code = 1


class InvariantError(CorpusForgeError, ValueError):
    """Data that parses but breaks a documented invariant."""

    exit_code = 2


class StorageError(CorpusForgeError, OSError):
    exit_code = 3


class WavError(InputError):
    pass


class UnreadableWavError(WavError):
    pass


class NonMonoError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class ManifestFormatError(InputError):
    def __init__(self, path, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class DuplicateIdError(InvariantError):
    def __init__(self, segment_id: str, where: str = ""):
        self.segment_id = segment_id
        suffix = f" ({where})" if where else ""
        super().__init__(f"duplicate segment id {segment_id!r}{suffix}")


class ScoreRangeError(InvariantError):
    pass


class UnknownSegmentError(InputError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__("unknown segment ids: " + ", ".join(self.ids))


class MissingScoreError(InputError):
    def __init__(self, scorer: str, ids):
        self.scorer = scorer
        self.ids = list(ids)
        super().__init__(f"segments missing score {scorer!r}: " + ", ".join(self.ids))


class UnclassifiedSegmentError(InputError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__("unclassified segments: " + ", ".join(self.ids))


class MatrixFormatError(InputError):
    def __init__(self, path, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


class CoverageError(InvariantError):
    pass


class ConfigError(InputError):
    pass
