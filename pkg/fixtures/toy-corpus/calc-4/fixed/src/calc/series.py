"""Running aggregates over a series."""


def running_max(values):
    out = []
    cur = None
    for v in values:
        if cur is None or v > cur:
            cur = v
        out.append(cur)
    return out
