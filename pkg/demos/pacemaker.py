"""A VVI-style pacemaker: sense a beat or pace after a second of silence.

The vvi thread reacts to sensed beats by sending on n.  A timeout on n and
p (the "lrl" interval, 1 s) fires whenever neither was sent for a full
second, and the thread then paces on p.  After the run, the engine's
firings are compared with a brute-force scan of the recorded events, and
every built-in property suite is checked.

    python demos/pacemaker.py
"""

from aadl_rts import Director, load_model
from aadl_rts.checker import builtin_suite, check_suite, engine_firings, timeout_oracle, trace_timeouts
from aadl_rts.cli import GALLERY_HORIZON, gallery_file
from aadl_rts.director import load_scenario
from aadl_rts.temporal import at

S = 1_000_000_000


def main():
    model = load_model(gallery_file("pacemaker", ".json"))
    scenario, _ = load_scenario(gallery_file("pacemaker", ".scenario.jsonl"), model)
    trace = Director(model, scenario=scenario, seed=1, horizon_ns=GALLERY_HORIZON["pacemaker"]).run()

    events = []
    for m in trace.marks("dispatch"):
        if m.info["thread"] == "vvi":
            what = "pace " if any(t.startswith("timeout") for t in m.info["triggers"]) else "sense"
            events.append((m.time.t, what))
    print("timeline (s):", "  ".join(f"{t / S:.1f} {w.strip()}" for t, w in events))

    (lrl,) = trace_timeouts(trace)
    fired = sorted(t.t / S for t in engine_firings(trace, lrl))
    oracle = sorted(t.t / S for t in timeout_oracle(trace, lrl))
    print("engine fired at:", fired)
    print("oracle says:    ", oracle)

    end = trace.seal
    print("senses:", at(trace, "Var:vvi:senses", end), " paces:", at(trace, "Var:vvi:paces", end),
          " battery reports logged:", at(trace, "Var:logger:entries", end))

    print()
    print(check_suite(trace, builtin_suite("all")).format_text())


if __name__ == "__main__":
    main()
