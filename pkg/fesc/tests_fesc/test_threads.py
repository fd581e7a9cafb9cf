import threading

import pytest
from coveo_settings.mock import mock_config_value
from coveo_testing.markers import UnitTest

from fesc.settings import FESC_THREADS
from fesc.threads import parallel_map, worker_count


@UnitTest
def test_worker_count_follows_the_setting() -> None:
    with mock_config_value(FESC_THREADS, 4):
        assert worker_count() == 4
    with mock_config_value(FESC_THREADS, 0):
        assert worker_count() == 1


@UnitTest
def test_worker_count_from_the_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("FESC_THREADS", "3")
    assert worker_count() == 3


@UnitTest
def test_parallel_map_keeps_the_input_order() -> None:
    with mock_config_value(FESC_THREADS, 4):
        assert parallel_map(lambda x: x * x, range(20)) == [x * x for x in range(20)]


@UnitTest
def test_single_worker_runs_inline() -> None:
    with mock_config_value(FESC_THREADS, 1):
        threads = parallel_map(lambda _: threading.get_ident(), range(3))
    assert set(threads) == {threading.get_ident()}
