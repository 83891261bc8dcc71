import json

import pytest

from gxestat.bundle import (
    AnalysisBundle,
    BundleIoError,
    SchemaVersionMismatchError,
    read_bundle,
    write_bundle,
)


@pytest.fixture()
def bundle():
    return AnalysisBundle(
        dataset_summary={"n_records": 4, "genotypes": ["a", "b"]},
        significance={"case": 1, "table": {"rows": []}},
        stability={"rows": [{"genotype": "a", "slope": 1.0000000000000002}]},
        ammi={"singular_values": [3.5, 0.1]},
        gge={"modes": {}},
    )


def test_round_trip(tmp_path, bundle):
    path = tmp_path / "bundle.json"
    write_bundle(bundle, path)
    again = read_bundle(path)
    assert again.to_json_dict() == bundle.to_json_dict()


def test_round_trip_bit_identical(tmp_path, bundle):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_bundle(bundle, p1)
    write_bundle(read_bundle(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_shortest_round_trip_floats(tmp_path, bundle):
    path = tmp_path / "bundle.json"
    write_bundle(bundle, path)
    doc = json.loads(path.read_text())
    assert doc["stability"]["rows"][0]["slope"] == 1.0000000000000002


def test_unknown_fields_preserved(tmp_path, bundle):
    path = tmp_path / "bundle.json"
    doc = bundle.to_json_dict()
    doc["future_field"] = {"x": 1}
    path.write_text(json.dumps(doc))
    again = read_bundle(path)
    assert again.extra == {"future_field": {"x": 1}}
    assert "future_field" in again.to_json_dict()


def test_truncated_file_reports_offset(tmp_path, bundle):
    path = tmp_path / "bundle.json"
    write_bundle(bundle, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(BundleIoError) as err:
        read_bundle(path)
    assert err.value.byte_offset is not None


def test_version_mismatch(tmp_path, bundle):
    path = tmp_path / "bundle.json"
    doc = bundle.to_json_dict()
    doc["version"] = "gxestat-bundle/99"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaVersionMismatchError):
        read_bundle(path)


def test_non_object_root(tmp_path):
    path = tmp_path / "bundle.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(BundleIoError):
        read_bundle(path)


def test_full_pipeline_bundle_size_and_parse_time(tmp_path, oats):
    import time

    import gxestat as gx

    bundle = gx.run_all(oats, case_id=2, seed=3, n_boot=200)
    path = tmp_path / "bundle.json"
    write_bundle(bundle, path)
    size_kb = path.stat().st_size / 1024
    assert 10 <= size_kb <= 500
    t0 = time.perf_counter()
    read_bundle(path)
    assert time.perf_counter() - t0 < 0.1
