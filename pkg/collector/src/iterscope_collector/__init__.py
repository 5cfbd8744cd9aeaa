"""Framework-side collector: runs a model via its provider functions and
emits iterscope measurement traces."""

from .measure import collect, trace_lines
from .providers import ProviderBundle, ProviderError, load_providers

__version__ = "0.1.0"
