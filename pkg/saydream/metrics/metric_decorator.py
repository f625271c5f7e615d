import inspect
from typing import Callable, TypeVar
from saydream import metrics
T = TypeVar('T', bound=Callable)

RATE = 'rate'
MEAN = 'mean'


def metric(print_name: str, desc: str, key: str,
           aggregate: str = RATE) -> Callable:
    """
    A decorator for per-video scorers to make them part of every metrics
    report. A scorer takes the per-frame `detections` of a video, its `task`
    and the evaluation `config`, and returns a bool (aggregated as a
    percentage) or a number (aggregated as a mean).

    Args:
      print_name: The name used in printed summaries.
      desc: A brief description of the metric.
      key: The column name in the report.
      aggregate: "rate" for percentages of true values, "mean" for means.
    """
    if (aggregate not in (RATE, MEAN)):
        raise ValueError(f'Unknown aggregate "{aggregate}"')

    def register_metric(fn: T) -> T:
        fn_unw = inspect.unwrap(fn)
        params = inspect.signature(fn_unw).parameters
        missing = [p for p in ('detections', 'task', 'config')
                   if p not in params]
        if (len(missing) > 0):
            raise TypeError(f'Signature for function "{fn_unw.__qualname__}" '
                            'does not match metric signature; Does not '
                            f'contain parameter{"s" if len(missing) > 1 else ""}'
                            f' {", or ".join(missing)}')
        metrics.register_metric(fn, key)
        setattr(fn_unw, '__print_name__', print_name)
        setattr(fn_unw, '__description__', desc)
        setattr(fn_unw, '__aggregate__', aggregate)
        return fn
    return register_metric
