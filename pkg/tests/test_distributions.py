import json
import math
from pathlib import Path

import numpy as np
import pytest

from gxestat.distributions import InvalidDfError, dist_cdf, dist_ppf, dist_sf

ORACLE = json.loads((Path(__file__).parent / "data" / "cdf_oracle.json").read_text())


def test_t_symmetry_at_zero():
    assert dist_cdf("t", 0.0, 5) == pytest.approx(0.5, abs=1e-15)


def test_chisq_two_df_closed_form():
    for x in (0.5, 2.0, 7.3):
        assert dist_cdf("chisq", x, 2) == pytest.approx(1.0 - math.exp(-x / 2.0), abs=1e-12)
    assert dist_cdf("chisq", 2.0, 2) == pytest.approx(0.6321205588, abs=1e-9)


def test_against_high_precision_table():
    worst = 0.0
    for row in ORACLE:
        got = dist_cdf(row["kind"], row["x"], row["df1"], row["df2"])
        worst = max(worst, abs(got - float(row["cdf"])))
    assert worst <= 1e-10


def test_sf_complements_cdf_in_tails():
    assert dist_sf("chisq", 42.0, 3) == pytest.approx(1.0 - dist_cdf("chisq", 42.0, 3), rel=1e-6)
    # deep tail keeps precision where 1-cdf would round to zero
    assert 0.0 < dist_sf("f", 40.0, 23, 552) < 1e-20 or dist_sf("f", 40.0, 23, 552) >= 0.0
    assert dist_sf("t", 9.0, 26) > 0.0


@pytest.mark.parametrize("kind,df1,df2", [("normal", None, None), ("t", 7, None), ("chisq", 4, None), ("f", 5, 24)])
def test_cdf_nondecreasing(kind, df1, df2):
    xs = np.linspace(-4.0, 8.0, 60) if kind in ("normal", "t") else np.linspace(0.0, 12.0, 60)
    vals = [dist_cdf(kind, float(x), df1, df2) for x in xs]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 for v in vals)


def test_support_boundaries():
    assert dist_cdf("chisq", 0.0, 3) == 0.0
    assert dist_cdf("f", 0.0, 3, 9) == 0.0
    assert dist_cdf("normal", -40.0) == pytest.approx(0.0, abs=1e-300)


def test_ppf_round_trip():
    for kind, df1, df2 in (("normal", None, None), ("t", 26, None), ("chisq", 8, None), ("f", 9, 270)):
        for p in (0.025, 0.5, 0.9, 0.975, 0.999):
            x = dist_ppf(kind, p, df1, df2)
            assert dist_cdf(kind, x, df1, df2) == pytest.approx(p, abs=1e-9)


def test_known_quantiles():
    assert dist_ppf("t", 0.975, 26) == pytest.approx(2.0555294, abs=1e-5)
    assert dist_ppf("normal", 0.975) == pytest.approx(1.959964, abs=1e-5)


def test_invalid_df():
    with pytest.raises(InvalidDfError):
        dist_cdf("t", 1.0, None)
    with pytest.raises(InvalidDfError):
        dist_cdf("chisq", 1.0, -2)
    with pytest.raises(InvalidDfError):
        dist_cdf("f", 1.0, 3, None)
    with pytest.raises(ValueError):
        dist_cdf("cauchy", 0.0)
