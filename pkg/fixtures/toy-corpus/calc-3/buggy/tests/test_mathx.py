import unittest

from calc.mathx import gcd


def diff(expected, actual):
    return "expected:<%s> but was:<%s>" % (expected, actual)


class MathxTest(unittest.TestCase):
    def test_zero(self):
        self.assertEqual(gcd(0, 0), 0)

    def test_common_divisor(self):
        got = gcd(12, 18)
        self.assertEqual(got, 6, diff('6', got))
