"""finalg: a workbench for finite algebras and their congruence identities."""

__version__ = "0.1.0"
