"""Configure details for documentation with sphinx."""
import os
import sys
from datetime import date

import bulk_ad


curdir = os.path.dirname(__file__)
sys.path.append(os.path.abspath(os.path.join(curdir, '..', 'bulk_ad')))


# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'sphinx.ext.autosummary',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'numpydoc',
]

# generate autosummary even if no references
autosummary_generate = True
autodoc_default_options = {'inherited-members': None}
numpydoc_class_members_toctree = False
numpydoc_attributes_as_param_list = True

source_suffix = '.rst'
master_doc = 'index'

# General information about the project.
project = u'bulk_ad'
td = date.today()
copyright = u'%s, bulk-ad developers. Last updated on %s' % (td.year,
                                                              td.isoformat())
author = u'bulk-ad developers'

version = bulk_ad.__version__
release = version

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

html_show_sourcelink = False
html_theme = 'alabaster'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'mne': ('https://mne.tools/dev', None),
    'numpy': ('https://numpy.org/devdocs', None),
}
intersphinx_timeout = 5
