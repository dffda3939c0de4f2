"""
Thread Safety Tests

Tests concurrent access to the shared iterate cache, the data service and the
OPF loss, as used by parallel sweep workers.
Run with: pytest tests/test_thread_safety.py -v
"""

from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

from opf_distill.cache import IterateCache
from opf_distill.distill import OpfFitLoss
from opf_distill.services import DataService


class TestIterateCacheConcurrency:
    """Tests for concurrent cache access."""

    def test_concurrent_puts_respect_capacity(self):
        cache: IterateCache[int] = IterateCache(max_entries=8)
        errors = []

        def writer(worker: int):
            try:
                for i in range(50):
                    W = np.full((2, 2), float(worker * 100 + i))
                    cache.put(W, worker)
                    cache.get(W)
            except Exception as e:
                errors.append(str(e))

        with ThreadPoolExecutor(max_workers=10) as executor:
            for future in as_completed([executor.submit(writer, w) for w in range(10)]):
                future.result()

        assert not errors
        assert len(cache) == 8
        assert cache.hits + cache.misses == 500

    def test_concurrent_reads_see_the_same_value(self):
        cache: IterateCache[list] = IterateCache()
        W = np.eye(3)
        value = [1, 2, 3]
        cache.put(W, value)

        with ThreadPoolExecutor(max_workers=20) as executor:
            results = list(executor.map(lambda _: cache.get(W.copy()), range(200)))

        assert all(r is value for r in results)
        assert cache.hits == 200


class TestDataServiceConcurrency:
    """Tests for the shared data service."""

    def test_datasets_are_built_once(self, run_config):
        service = DataService(run_config)
        with ThreadPoolExecutor(max_workers=8) as executor:
            datasets = list(executor.map(lambda _: service.opf_dataset(), range(16)))
            sets = list(executor.map(lambda _: service.distillation_set(), range(16)))

        assert all(d is datasets[0] for d in datasets)
        assert all(s is sets[0] for s in sets)

    def test_feeder_is_loaded_once(self, run_config):
        service = DataService(run_config)
        with ThreadPoolExecutor(max_workers=8) as executor:
            feeders = list(executor.map(lambda _: service.feeder(), range(16)))
        assert all(f is feeders[0] for f in feeders)


class TestSharedLoss:
    """Tests for one OPF loss used from several threads."""

    def test_concurrent_gradients_match_serial(self, opf_dataset):
        gen = np.random.default_rng(12)
        iterates = [np.eye(6) + gen.normal(scale=0.1, size=(6, 6)) for _ in range(4)]
        serial = [OpfFitLoss(opf_dataset).gradient(W) for W in iterates]

        shared = OpfFitLoss(opf_dataset, jobs=2)
        with ThreadPoolExecutor(max_workers=4) as executor:
            threaded = list(executor.map(shared.gradient, iterates * 3))

        for i, grad in enumerate(threaded):
            np.testing.assert_array_equal(grad, serial[i % 4])
