"""Diverse double-compiling laboratory for the MiniLang toolchain."""

__version__ = "0.1.0"
