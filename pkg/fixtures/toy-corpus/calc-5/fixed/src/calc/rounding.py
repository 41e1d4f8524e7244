"""Rounding helpers."""

from decimal import ROUND_HALF_UP, Decimal


def round_half_up(x, ndigits=0):
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(str(x)).quantize(quantum, rounding=ROUND_HALF_UP))
