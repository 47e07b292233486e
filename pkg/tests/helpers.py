"""Fixture builders shared by several test modules."""

from stare.traj import map_cell

H = 3600
WORKED_TOKENS = [97, 1, 2, 5, 3, 1, 0, 0, 0, 98, 36, 32, 24, 24, 32, 0, 0, 0, 99]
WORKED_TOKENIZE = {"block_seconds": 1800, "max_dwell": 76 * 1800}


def worked_example_csv(path):
    """Raw fixes for the documented example.

    Twenty zoom-16 cells; agent 'fix' visits sorted cells 1, 2, 5, 3, 1 for
    8, 6, 2, 2, 6 hours within one day, and agent 'filler' makes the corpus
    hold all twenty cells with at most eight stays per day.
    """
    cells = sorted({map_cell(38.90 + 0.01 * k, -77.10 + 0.013 * k, 16) for k in range(20)})
    assert len(cells) == 20
    rows = []
    day0 = 100 * 86400

    def stay(agent, cell, start, hours):
        lat, lon = cell.center()
        for t in range(start, start + hours * H, 60):  # last fix one minute before the move
            rows.append(f"{agent},{lat:.9f},{lon:.9f},{t}")
        return start + hours * H

    t = day0
    for idx, hours in zip([1, 2, 5, 3, 1], [8, 6, 2, 2, 6]):
        t = stay("fix", cells[idx - 1], t, hours)
    for d, chunk in enumerate([cells[0:8], cells[8:16], cells[16:20]]):
        t = day0 + (d + 1) * 86400
        for c in chunk:
            t = stay("filler", c, t, 2)
    path.write_text("agent_id,lat,lon,timestamp\n" + "\n".join(rows) + "\n")
    return path
