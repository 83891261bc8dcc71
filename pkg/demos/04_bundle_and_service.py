"""The full pipeline as one artifact, and the same thing over HTTP.

`run_all` produces the bundle the web UI consumes; the HTTP service
serves the identical payloads per session.  Requires no running server:
the service is exercised in-process.
"""
import json
from pathlib import Path

from fastapi.testclient import TestClient

import gxestat as gx
from gxestat.bundle import read_bundle, write_bundle
from gxestat.fixtures import fixture_path
from gxestat.service import create_app

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# --- one-call pipeline -------------------------------------------------------

ds = gx.load_oats()
bundle = gx.run_all(ds, case_id=2, seed=99, n_boot=300)
path = OUT / "oats_bundle.json"
write_bundle(bundle, path)
print(f"bundle: {path} ({path.stat().st_size/1024:.0f} KB)")

again = read_bundle(path)
assert again.to_json_dict() == bundle.to_json_dict()
print("round trip: identical")

print("significance rows:", len(bundle.significance["table"]["rows"]))
print("stability rows:", len(bundle.stability["rows"]))
print("gge modes:", ", ".join(sorted(bundle.gge["modes"])))

# --- the same analyses over HTTP ----------------------------------------------

client = TestClient(create_app())
csv_bytes = fixture_path("oats.csv").read_bytes()
resp = client.post("/datasets?rep_col=RP", content=csv_bytes)
session = resp.json()
print("\nservice session:", session["session_id"][:8], "summary:", session["summary"]["n_genotypes"], "genotypes")

stab = client.post(f"/sessions/{session['session_id']}/stability").json()
top = max(stab["rows"], key=lambda r: r["kang_ys"])
print("highest yield-stability score:", top["genotype"], top["kang_ys"])

gge = client.post(
    f"/sessions/{session['session_id']}/gge", json={"mode": "which_won_where"}
).json()
print("winners:", json.dumps(gge["overlays"]["winner_by_environment"]))
