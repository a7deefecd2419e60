"""Start the mission service for the operator console.

Environment:
    VOLCNAV_BIND      host:port to listen on        (default 127.0.0.1:8750)
    VOLCNAV_DATA_DIR  session storage directory     (default ./volcnav-data)
    VOLCNAV_CLOCK     realtime | max-speed          (default realtime)

The console (frontend/) talks to these endpoints; see API.md for the full
surface. A ready-to-upload world/graph/mission triple for the crater-rim
survey is printed to demos/output/ on request:

    python demos/run_service.py --write-fixtures   # just write the fixture docs
    python demos/run_service.py                    # serve
"""

import json
import pathlib
import sys

from volcnav.roadgraph import rim_loop_graph_document
from volcnav.scenarios import SURVEY_ORIGIN, rim_survey_scenario


def write_fixtures():
    out = pathlib.Path(__file__).parent / "output"
    out.mkdir(exist_ok=True)
    world, graph, mission, _ = rim_survey_scenario(seed=7)
    (out / "world.json").write_text(json.dumps(world.to_document(), indent=2))
    doc, _ = rim_loop_graph_document(SURVEY_ORIGIN, radius=50.0, n_rim=40)
    (out / "graph.json").write_text(json.dumps(doc, indent=2))
    mission_doc = {
        "targets": [{"lat": t.latitude, "lon": t.longitude} for t in mission.targets],
        "return_to_start": mission.return_to_start,
    }
    (out / "mission.json").write_text(json.dumps(mission_doc, indent=2))
    print(f"wrote world.json, graph.json, mission.json under {out}")


if __name__ == "__main__":
    if "--write-fixtures" in sys.argv:
        write_fixtures()
    else:
        from volcnav.service import main

        main()
