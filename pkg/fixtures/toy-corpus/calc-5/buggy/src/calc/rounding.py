"""Rounding helpers."""


def round_half_up(x, ndigits=0):
    return round(x, ndigits)
