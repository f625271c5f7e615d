# Sphinx configuration for the saydream documentation.
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

project = 'saydream'
copyright = '2026, the saydream developers'
author = 'the saydream developers'
release = '0.2.0'

extensions = [
    'myst_parser',
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinxarg.ext',
    'sphinx.ext.napoleon',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
}

autosummary_generate = True
# plotting is an optional extra
autodoc_mock_imports = ['matplotlib']
autodoc_member_order = 'bysource'
napoleon_google_docstring = True
napoleon_numpy_docstring = False

default_role = 'autolink'
templates_path = ['_templates']
exclude_patterns = []

html_theme = 'furo'
html_title = 'saydream'

# members that only clutter the API pages
_SKIPPED = frozenset({'__weakref__', '__doc__', '__module__', '__dict__',
                      'get_parser', 'main'})


def autodoc_skip_member(app, what, name, obj, skip, options):
    if (what == 'module' and name.startswith('_')):
        return True
    return True if name in _SKIPPED else None


def setup(app):
    app.connect('autodoc-skip-member', autodoc_skip_member)
