import unittest

from calc.series import running_max


def diff(expected, actual):
    return "expected:<%s> but was:<%s>" % (expected, actual)


class SeriesTest(unittest.TestCase):
    def test_empty(self):
        self.assertEqual(running_max([]), [])

    def test_increasing(self):
        got = running_max([1, 2, 3])
        self.assertEqual(got, [1, 2, 3], diff('[1, 2, 3]', got))
