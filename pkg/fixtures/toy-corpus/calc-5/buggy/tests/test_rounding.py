import unittest

from calc.rounding import round_half_up


def diff(expected, actual):
    return "expected:<%s> but was:<%s>" % (expected, actual)


class RoundingTest(unittest.TestCase):
    def test_round_down(self):
        self.assertEqual(round_half_up(2.4), 2)

    def test_half_rounds_up(self):
        got = round_half_up(2.5)
        self.assertEqual(got, 3, diff('3', got))
