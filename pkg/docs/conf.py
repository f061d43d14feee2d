#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# notchkin documentation build configuration file.

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

from notchkin import version_info  # noqa: E402

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.todo',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'notchkin'
copyright = '2026'
author = 'notchkin developers'

# The short X.Y version and the full version
version = '.'.join(version_info[:2])
release = '.'.join(version_info)

exclude_patterns = []
pygments_style = 'sphinx'
todo_include_todos = False

html_theme = 'nature'
htmlhelp_basename = 'notchkindoc'

latex_documents = [
    (master_doc, 'notchkin.tex', 'notchkin Documentation', author, 'manual'),
]
man_pages = [
    (master_doc, 'notchkin', 'notchkin Documentation', [author], 1)
]
