"""Shared text utilities."""


def normalize_space(text):
    return " ".join(text.split())
