"""Search space definitions and random sampling."""

import math
import random

import pytest

from btt.errors import InvalidInput
from btt.space import Dim, HpConfig, SearchSpace, random_sample


def make_space():
    return SearchSpace(
        name="demo",
        dims=(
            Dim("lr", "continuous_log", 1e-4, 1e-1),
            Dim("momentum", "continuous", 0.0, 0.9),
            Dim("width", "discrete", 4, 64),
            Dim("activation", "categorical", choices=("relu", "tanh")),
        ),
    )


class TestSpace:
    def test_duplicate_names_rejected(self):
        with pytest.raises(InvalidInput):
            SearchSpace("s", (Dim("a", "continuous", 0, 1), Dim("a", "discrete", 0, 3)))

    def test_empty_interval_rejected(self):
        with pytest.raises(InvalidInput):
            Dim("a", "continuous", 2.0, 1.0)

    def test_log_domain_positive(self):
        with pytest.raises(InvalidInput):
            Dim("a", "continuous_log", 0.0, 1.0)

    def test_degenerate_interval_allowed(self):
        d = Dim("a", "discrete", 20, 20)
        assert d.contains(20)

    def test_round_trip_dict(self):
        s = make_space()
        assert SearchSpace.from_dict(s.to_dict()) == s

    def test_file_round_trip(self, tmp_path):
        import json

        p = tmp_path / "space.json"
        p.write_text(json.dumps(make_space().to_dict()))
        assert SearchSpace.from_file(p) == make_space()

    def test_validate_config(self):
        s = make_space()
        good = HpConfig({"lr": 0.01, "momentum": 0.5, "width": 8, "activation": "relu"})
        s.validate_config(good)
        with pytest.raises(InvalidInput):
            s.validate_config(HpConfig({**good.values, "width": 1000}))
        with pytest.raises(InvalidInput):
            s.validate_config(HpConfig({k: v for k, v in good.values.items() if k != "lr"}))


class TestSampling:
    def test_deterministic_given_seed(self):
        s = make_space()
        a = random_sample(s, random.Random(7))
        b = random_sample(s, random.Random(7))
        assert a == b

    def test_values_in_domain(self):
        s = make_space()
        rng = random.Random(3)
        for _ in range(200):
            s.validate_config(random_sample(s, rng))

    def test_singleton_categorical(self):
        s = SearchSpace("s", (Dim("only", "categorical", choices=("a",)),))
        rng = random.Random(0)
        assert all(random_sample(s, rng).values["only"] == "a" for _ in range(20))

    def test_log_uniform_monte_carlo(self):
        # oracle: mean of log10 over [1e-4, 1e-1] is -2.5
        s = SearchSpace("s", (Dim("lr", "continuous_log", 1e-4, 1e-1),))
        rng = random.Random(123)
        n = 10**6
        total = 0.0
        for _ in range(n):
            total += math.log10(random_sample(s, rng).values["lr"])
        assert abs(total / n - (-2.5)) < 0.02
