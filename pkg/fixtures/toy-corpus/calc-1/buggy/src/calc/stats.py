"""Descriptive statistics."""


def mean(values):
    return sum(values) / len(values)


def median(values):
    ordered = list(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2
