#!/usr/bin/env python
# coding: utf-8

"""
CrackTrack: numerical experiments on unique continuation at the edge of a crack.

CrackTrack straightens a curved crack, solves the resulting divergence-form equation on
graded tetrahedral meshes of the slit ball, and checks the frequency, blow-up and Fourier
asymptotics of the solution against the Dirichlet spectrum of the slit sphere. The
inequalities behind the argument (Hardy, coercivity, Rellich-Necas, Pohozaev) are audited
numerically along the way.

The package supports both command-line usage (`cracktrack <subcommand>`) and programmatic use.
"""

# Import logging configuration but don't configure yet
# (Configuration will be handled by the entry points based on command line args)
from .utils.logging_utils import configure_logging

# Version information
__version__ = "0.1.0"
