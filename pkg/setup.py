#!/usr/bin/env python
# coding: utf-8

import os

from setuptools import find_packages, setup


def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()


setup(
    name="cracktrack",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        # Scientific computing
        "numpy<2",
        "scipy>=1.12",
        "pandas",
        "sympy",
        # Autodiff for the Rellich-Necas audit
        "torch==2.1.2",
        # Configuration and utilities
        "pyyaml>=5.1",
        "more-itertools",
    ],
    extras_require={
        "dev": [
            # Testing
            "pytest",
            "pytest-cov",
        ],
    },
    entry_points={
        "console_scripts": [
            "cracktrack=cracktrack.command_line_pipe:main",
        ]
    },
    python_requires=">=3.10",
    description="Numerical experiments on unique continuation at the edge of a crack",
    long_description=read("README.md"),
    long_description_content_type="text/markdown",
    license="MIT",
    keywords=[
        "Finite Elements",
        "Unique Continuation",
        "Crack",
        "Almgren Frequency",
        "Elliptic PDE",
    ],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
