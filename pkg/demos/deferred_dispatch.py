"""A thread that needs both A and B before it will run.

An event on A alone dispatches the thread, but no transition's condition
holds, so it declines.  The trigger is not lost: when B shows up later the
retained A and the fresh B together satisfy "on dispatch A and B".

    python demos/deferred_dispatch.py
"""

from aadl_rts import Director, load_model
from aadl_rts.cli import GALLERY_HORIZON, gallery_file
from aadl_rts.director import load_scenario
from aadl_rts.temporal import at


def main():
    model = load_model(gallery_file("ab_deferred", ".json"))
    scenario, digest = load_scenario(gallery_file("ab_deferred", ".scenario.jsonl"), model)
    print("injections:", ", ".join(f"{i.port}@{i.t // 1_000_000}ms" for i in scenario))

    trace = Director(model, scenario=scenario, seed=1,
                     horizon_ns=GALLERY_HORIZON["ab_deferred"]).run()

    for m in trace.marks():
        if m.info.get("thread") != "ab" or m.mark not in ("dispatch", "defer", "complete"):
            continue
        ms = m.time.t / 1e6
        if m.mark == "dispatch":
            print(f"{ms:5.0f} ms  dispatch on {m.info['triggers']}")
        elif m.mark == "defer":
            kept = sorted(at(trace, "Sts:ab:status", m.time).triggers)
            print(f"{ms:5.0f} ms    declined, keeping {kept}")
        else:
            print(f"{ms:5.0f} ms    ran, now in state {at(trace, 'Var:ab:$state', m.time)}")

    end = trace.seal
    print("joins:", at(trace, "Var:ab:joins", end), " sink saw:", at(trace, "Var:sink:seen", end))


if __name__ == "__main__":
    main()
