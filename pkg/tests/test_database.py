import json
import math

import pytest

from billiard_zeta.database import OrbitDatabase, RayRecord, build_database, default_jobs, dumps
from billiard_zeta.errors import ConfigError, ProvenanceError
from billiard_zeta.geometry import three_disk_scene
from billiard_zeta.symbolic import Orientation, canonicalize


def test_counts(scene, db4):
    assert len(db4.records) == 8  # 3 + 2 + 3 primitive classes; iterates are not stored
    assert [r.n for r in db4.records].count(4) == 3
    db2 = build_database(scene, 2)
    assert len(db2.records) == 3
    assert all(abs(r.det_abs - 96) <= 1e-9 for r in db2.records)


def test_every_class_once(db10):
    words = [r.word for r in db10.records]
    assert len(words) == len(set(words)) == 226
    assert not db10.flagged()
    for r in db10.records:
        assert r.residual <= 1e-12 and r.cross_check_delta <= 1e-8
        if r.orientation == Orientation.CHIRAL.value:
            assert canonicalize(tuple(reversed(r.word))).word in set(words)


def test_deterministic_bytes(scene, db4):
    again = build_database(scene, 4)
    assert again.dumps() == db4.dumps()
    parallel = build_database(scene, 4, jobs=2)
    assert parallel.dumps() == db4.dumps()


def test_roundtrip(tmp_path, scene, db4):
    p = tmp_path / "db.jsonl"
    db4.save(p)
    back = OrbitDatabase.load(p, scene)
    assert back.dumps() == db4.dumps()
    head = json.loads(p.read_text().splitlines()[0])["header"]
    assert head["scene_hash"] == scene.hash() and head["count"] == 8


def test_provenance_mismatch(tmp_path, db4):
    p = tmp_path / "db.jsonl"
    db4.save(p)
    with pytest.raises(ProvenanceError):
        OrbitDatabase.load(p, three_disk_scene(side=7.0))
    lines = p.read_text().splitlines()
    head = json.loads(lines[0])
    head["header"]["scene_hash"] = "0" * 16
    p.write_text("\n".join([json.dumps(head)] + lines[1:]) + "\n")
    with pytest.raises(ProvenanceError):
        OrbitDatabase.load(p)


def test_missing_header(tmp_path):
    p = tmp_path / "db.jsonl"
    p.write_text('{"word": [1, 2]}\n')
    with pytest.raises(ConfigError):
        OrbitDatabase.load(p)


def test_flagged_records(scene):
    db = build_database(scene, 3, tol_orbit=1e-30)
    # (1,2) is solved exactly (residual 0) and still certifies
    assert [r.word for r in db.good()] == [(1, 2)]
    assert len(db.flagged()) == 4
    text = db.dumps()
    back = [RayRecord.from_dict(json.loads(line)) for line in text.splitlines()[1:]]
    assert all(math.isnan(r.tau) and "CertificationError" in r.error for r in back if r.flagged)


def test_float_format():
    assert dumps([0.1, 1 / 3, float("nan")]) == '[0.10000000000000001,0.33333333333333331,"nan"]'


def test_default_jobs(monkeypatch):
    monkeypatch.delenv("BILLIARD_ZETA_JOBS", raising=False)
    assert default_jobs(None) == 1
    monkeypatch.setenv("BILLIARD_ZETA_JOBS", "3")
    assert default_jobs(None) == 3
    assert default_jobs(2) == 2


def test_tau_cutoff(scene, db10):
    db = build_database(scene, 6, tau_max=20.0)
    assert all(r.tau <= 20.0 for r in db.records)
    assert {r.word for r in db.records} == {r.word for r in db10.records if r.n <= 6 and r.tau <= 20.0}
    assert db.covered_length() == 20.0
