"""
The per-video metric registry. Every module of this package is imported on
load so its `@metric` scorers register themselves; third-party scorers are
loaded from the ``saydream.metric`` entry point group.
"""
import pkgutil
import sys
import importlib
from typing import Dict
from collections.abc import Callable
if sys.version_info < (3, 10):
    from importlib_metadata import entry_points
else:
    from importlib.metadata import entry_points

from saydream.metrics.metric_decorator import metric  # noqa
from saydream import metrics

registry: Dict[str, Callable] = {}


def register_metric(func: Callable, key: str) -> None:
    if (key in registry and registry[key] is not func):
        raise ValueError(f'A metric with key "{key}" is already registered')
    registry[key] = func


# load local metrics
__all__ = [m[1] for m in pkgutil.iter_modules(metrics.__path__)]
for module in __all__:
    importlib.import_module('.'+module, package=__name__)
# load plugin metrics
for plugin_ep in entry_points(group='saydream.metric'):
    plugin_ep.load()

__all__.extend(['metric', 'registry'])
