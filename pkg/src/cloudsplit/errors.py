"""Exception taxonomy shared across the package.

Every error the library raises on purpose derives from CloudSplitError so
callers (and the CLI exit-code mapping) can catch one base class.
"""


class CloudSplitError(Exception):
    """Base class for all cloudsplit errors."""


class SelfCheckFailed(CloudSplitError):
    """A fragment's key does not match the hash of its payload."""


class UnknownLocation(CloudSplitError):
    """A storage location does not exist on the targeted provider."""


class CspUnreachable(CloudSplitError):
    """The targeted provider is simulated as offline."""


class UnknownCsp(CloudSplitError):
    """No provider with that id is registered."""


class EmptyCspList(CloudSplitError):
    """A broadcast was attempted with no providers."""


class PcspUnreachable(CloudSplitError):
    """Outsourcing aborted: the primary provider is offline."""


class UnknownObject(CloudSplitError):
    """The proxy has no record of that object id."""


class NoNewPcsp(CloudSplitError):
    """A repair needs a new primary provider and none can be chosen."""


class BadRow(CloudSplitError):
    """Row index invalid for the object, or the row cannot support the operation."""


class SharedFragment(CloudSplitError):
    """In-place replacement refused: other objects still reference the fragment."""


class PolicyViolation(CloudSplitError):
    """A fragment does not satisfy the privacy policy it must adhere to."""


class DegenerateEntity(CloudSplitError):
    """A protected entity occurs in no paragraph, or in all of them."""


class UnplaceableTerm(CloudSplitError):
    """A single term already exceeds the per-fragment risk cap on its own."""


class EmptyCorpus(CloudSplitError):
    """Corpus ingestion found no usable text."""


class WorkspaceLocked(CloudSplitError):
    """Another invocation holds the workspace lock."""


class Unrecoverable(CloudSplitError):
    """A fragment could not be rebuilt from any recorded location.

    ``row`` is the location-table row index, or None when the failure is not
    tied to a specific row (e.g. content dropped by an explicit delete).
    """

    def __init__(self, row: int | None, message: str):
        super().__init__(message)
        self.row = row
