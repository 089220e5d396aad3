import numpy as np
import pytest

from scatterscore.util import derive_seed, fmt_num, spawn_rng


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(7, "em", 2, 0) == derive_seed(7, "em", 2, 0)

    def test_path_sensitive(self):
        assert derive_seed(1, "a") != derive_seed(1, "b")
        assert derive_seed(1, "tree", 0) != derive_seed(1, "tree", 1)
        assert derive_seed(1, "x") != derive_seed(2, "x")

    def test_negative_and_numpy_ints_accepted(self):
        assert derive_seed(-5, "x") == derive_seed(-5, "x")
        assert derive_seed(3, np.int64(4)) == derive_seed(3, 4)

    def test_rejects_other_types(self):
        with pytest.raises(TypeError):
            derive_seed(0, 1.5)

    def test_spawned_generators_independent(self):
        a = spawn_rng(0, "left").random(4)
        b = spawn_rng(0, "right").random(4)
        assert not np.allclose(a, b)
        assert np.array_equal(a, spawn_rng(0, "left").random(4))


class TestFmtNum:
    @pytest.mark.parametrize(
        "value,expect",
        [
            (3, "3"),
            (-0.0, "0"),
            (1 / 3, "0.333333333"),
            (1.0, "1"),
            (1234567891.0, "1.23456789e+09"),
        ],
    )
    def test_nine_significant_digits(self, value, expect):
        assert fmt_num(value) == expect
