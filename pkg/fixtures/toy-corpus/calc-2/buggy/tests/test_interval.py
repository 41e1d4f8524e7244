import unittest

from calc.interval import clamp


def diff(expected, actual):
    return "expected:<%s> but was:<%s>" % (expected, actual)


class IntervalTest(unittest.TestCase):
    def test_inside(self):
        self.assertEqual(clamp(5, 0, 10), 5)

    def test_below(self):
        self.assertEqual(clamp(-3, 0, 10), 0)

    def test_above(self):
        got = clamp(15, 0, 10)
        self.assertEqual(got, 10, diff('10', got))
