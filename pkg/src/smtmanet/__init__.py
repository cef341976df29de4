"""Secure multipath message transmission for ad hoc networks, with binary-search
localization of Byzantine links and a deterministic simulator to evaluate it."""

__version__ = "0.1.0"
