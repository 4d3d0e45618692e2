import sys

import pytest

# deep numerals from nested iteration are built and compared recursively in places
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

NOT = r"(\b:Bool. if b then ff else tt)"
DOUBLE = "iter 0 {y -> succ (succ y)} (succ 0)"
ITER_NOT = "iter tt {x -> if x then ff else tt} 2"


@pytest.fixture
def rng():
    import random

    return random.Random(12345)
