#!/usr/bin/env python
# -*- coding: utf-8 -*-

from setuptools import setup, find_packages
from notchkin import __version__

with open('README.rst') as readme_file:
    readme = readme_file.read()

with open('CHANGELOG.rst') as history_file:
    history = history_file.read()

requirements = [
    'numpy>=1.20',
    'scipy>=1.6',
    'pandas>=1.5',
    'matplotlib>=3.3',
    'prompt_toolkit>=2.0',
]

test_requirements = [
    'pytest',
    'pytest-cov',
    'hypothesis',
]

setup(
    name='notchkin',
    version=__version__,
    description="Design, calibration and laser toolpath tool for notched-tube "
                "tendon-driven joints",
    long_description=readme + '\n\n' + history,
    packages=find_packages(include=['notchkin', 'notchkin.*']),
    package_data={
        'notchkin': ['config.ini', 'presets/*.json'],
        'notchkin.test': ['fixtures/*.json'],
    },
    include_package_data=True,
    install_requires=requirements,
    tests_require=test_requirements,
    python_requires='>=3.9',
    entry_points={
        'console_scripts': ['notchkin = notchkin.cli:main'],
    },
    zip_safe=False,
    keywords='notchkin continuum-robot laser-micromachining',
)
