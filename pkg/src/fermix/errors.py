"""Exception hierarchy shared across the toolkit."""


class FermixError(Exception):
    """Base class for all toolkit errors."""


class LoaderError(FermixError):
    """A source dataset could not be read (fatal) or a row/file is malformed."""


class ManifestError(FermixError):
    """A manifest violates its invariants (duplicate keys, bad counts, bad ratios)."""


class DetectorError(FermixError):
    """Face-detector adapter failure (process/IO). Retriable; distinct from "no face"."""


class ConfigError(FermixError):
    """An experiment config is missing, malformed, or references absent inputs."""
