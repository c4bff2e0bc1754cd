#!/usr/bin/env python
# coding: utf-8

"""Configuration, output, logging, quadrature and solver helpers shared by the CrackTrack stages."""
