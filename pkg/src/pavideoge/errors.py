"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) so the CLI can emit
machine-readable diagnostics.
"""


class PavideogeError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


# profile / corpus
class ProfileError(PavideogeError, ValueError):
    pass


class MissingField(ProfileError):
    pass


class UnknownField(ProfileError):
    pass


class BadPattern(ProfileError):
    pass


class BadTemplate(ProfileError):
    pass


class BadRegion(ProfileError):
    pass


class EmptyCorpus(PavideogeError):
    pass


class UnreadableFile(PavideogeError):
    pass


class DuplicateDocId(PavideogeError, ValueError):
    pass


class InvalidSpec(PavideogeError, ValueError):
    pass


class OutputExists(PavideogeError):
    pass


# extraction
class IdNotFound(PavideogeError, LookupError):
    pass


class FetchFailed(PavideogeError):
    pass


class LinkNotFound(PavideogeError, LookupError):
    pass


class PlaynumNotFound(PavideogeError, LookupError):
    pass


class PlaynumNotInteger(PavideogeError, ValueError):
    pass


# graph
class BadDamping(PavideogeError, ValueError):
    pass


class EmptyGraph(PavideogeError, ValueError):
    pass


class SingularSystem(PavideogeError):
    pass


# index
class EmptyCollection(PavideogeError, ValueError):
    pass


class AllDocsEmpty(PavideogeError, ValueError):
    pass


class UnknownDoc(PavideogeError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class EmptyQuery(PavideogeError, ValueError):
    pass


class BadIndexFile(PavideogeError, ValueError):
    pass


# fusion / tuning
class BadFactors(PavideogeError, ValueError):
    pass


class InconsistentStores(PavideogeError, ValueError):
    pass


class NoQueries(PavideogeError, ValueError):
    pass


class EmptyGrid(PavideogeError, ValueError):
    pass


class EmptyGroup(PavideogeError, ValueError):
    pass


class BadInputFile(PavideogeError, ValueError):
    pass


# pipeline
class StagePrereqMissing(PavideogeError):
    pass


class LockHeld(PavideogeError):
    pass
