"""Truncated Fock-space toolkit for the resolvent algebra of a non-relativistic Bose field."""
