import threading

import pytest

from utils.cache import BoundedCache


def test_values_are_built_once():
    cache = BoundedCache(4)
    calls = []
    first = cache.get_or_create("a", lambda: calls.append(1) or object())
    assert cache.get_or_create("a", lambda: calls.append(1) or object()) is first
    assert len(calls) == 1
    assert "a" in cache


def test_least_recently_used_entry_is_evicted():
    cache = BoundedCache(2)
    cache.get_or_create("a", lambda: 1)
    cache.get_or_create("b", lambda: 2)
    cache.get_or_create("a", lambda: 0)
    cache.get_or_create("c", lambda: 3)
    assert len(cache) == 2
    assert "a" in cache and "c" in cache
    assert "b" not in cache


def test_clear_empties_the_cache():
    cache = BoundedCache(2)
    cache.get_or_create("a", lambda: 1)
    cache.clear()
    assert len(cache) == 0
    assert cache.get_or_create("a", lambda: 5) == 5


def test_capacity_must_be_positive():
    with pytest.raises(ValueError):
        BoundedCache(0)


def test_racing_threads_see_one_value():
    cache = BoundedCache(8)
    gate = threading.Barrier(4)
    seen = []

    def worker():
        gate.wait()
        seen.append(cache.get_or_create("key", object))

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len({id(value) for value in seen}) == 1
