"""Width-limited text."""

ELLIPSIS = "…"


def truncate(text, width):
    if len(text) <= width:
        return text
    return text[: width - 1] + ELLIPSIS
