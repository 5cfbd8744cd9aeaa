"""Loading the user's entry file and its three provider functions."""

from __future__ import annotations

import importlib.util
import sys
from dataclasses import dataclass
from pathlib import Path

PROVIDER_NAMES = ("model_provider", "input_provider", "iteration_provider")


class ProviderError(RuntimeError):
    pass


@dataclass
class ProviderBundle:
    """The user-written entry points that let the collector run the model.

    model_provider() returns the model; input_provider(batch_size=N) returns
    inputs; iteration_provider(model) returns a nullary callable that runs a
    single training iteration. The module reference is kept so the batch
    size can be forced for one profiling run.
    """

    module: object
    entry_path: Path

    def __post_init__(self):
        for name in PROVIDER_NAMES:
            if not callable(getattr(self.module, name, None)):
                raise ProviderError(f"entry file does not define {name!r}")

    def force_batch_size(self, batch_size: int) -> None:
        """Make every input_provider() call in this module use batch_size.

        The user's iteration closure typically calls input_provider() with
        its default; profiling a different batch size has to override that
        default at the module level.
        """
        original = self.module.input_provider

        def forced(*args, **kwargs):
            kwargs["batch_size"] = batch_size
            return original(*args, **kwargs)

        self.module.input_provider = forced

    def model(self):
        return self.module.model_provider()

    def inputs(self):
        return self.module.input_provider()

    def iteration(self, model):
        step = self.module.iteration_provider(model)
        if not callable(step):
            raise ProviderError("iteration_provider must return a callable")
        return step


def load_providers(entry_file: str | Path) -> ProviderBundle:
    entry_path = Path(entry_file).resolve()
    if not entry_path.is_file():
        raise ProviderError(f"entry file not found: {entry_path}")
    spec = importlib.util.spec_from_file_location("iterscope_entry", entry_path)
    module = importlib.util.module_from_spec(spec)
    sys.modules["iterscope_entry"] = module
    try:
        spec.loader.exec_module(module)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"entry file failed to import: {exc}") from exc
    return ProviderBundle(module=module, entry_path=entry_path)
