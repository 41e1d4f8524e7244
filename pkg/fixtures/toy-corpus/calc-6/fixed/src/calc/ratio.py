"""Ratio parsing."""


def parse_ratio(text):
    num, den = text.split(":")
    return int(num) / int(den)
