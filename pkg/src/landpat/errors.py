"""Exception types shared across the package.

The CLI maps these onto exit codes: ParseError and IoError are data
problems (exit 1), UsageError is a caller mistake (exit 2).
"""


class LandpatError(Exception):
    """Base class for all package-specific errors."""


class ParseError(LandpatError):
    """Malformed input file (raster header, cell block, CSV)."""


class IoError(LandpatError):
    """A file could not be read or written."""


class UsageError(LandpatError):
    """Invalid arguments: unknown metric names, bad window specs, etc."""


class RenderError(LandpatError):
    """A class code has no palette entry and defaults are disabled."""
