__version__ = '0.2.0'

__all__ = [
    'autodiff',
    'sim',
    'codec',
    'diffusion',
    'distill',
    'imagination',
    'policy',
    'metrics',
    'export',
    'plot'
]
