"""Behaviors written as Python classes, and a timeout created at start-up.

A periodic heart sends a beat every 10 ms until it "stops" after 60 ms.  A
sporadic watchdog registers a 25 ms timeout on its beat port during
initialization; every beat re-arms it, so it only expires once the beats
stop.  The run is driven one dispatch round at a time with ``step``.

    python demos/watchdog.py
"""

from aadl_rts import Behavior, Director, parse_model
from aadl_rts.temporal import at

MS = 1_000_000

MODEL = """
{"threads": [
  {"id": "heart", "dispatch": "periodic", "period_ns": 10000000,
   "ports": [{"id": "beat", "kind": "eventdata", "dir": "out", "type": "Integer"}]},
  {"id": "dog", "dispatch": "sporadic",
   "ports": [{"id": "beat", "kind": "eventdata", "dir": "in", "type": "Integer", "queueSize": 2},
             {"id": "alarm", "kind": "event", "dir": "out"}]}],
 "connections": [["heart.beat", "dog.beat"]]}
"""


class Heart(Behavior):
    def initialize(self, ctx):
        ctx.vars["n"] = 0

    def select(self, vars, status):
        return "beat" if vars["n"] < 7 else "quiet"

    def execute(self, ctx, choice):
        if choice == "beat":
            ctx.vars["n"] += 1
            ctx.put_value("beat", ctx.vars["n"])


class Dog(Behavior):
    def initialize(self, ctx):
        ctx.vars["timer"] = ctx.create_timeout(["beat"], 25 * MS, "dog")
        ctx.vars["last"] = 0
        ctx.vars["alarms"] = 0

    def select(self, vars, status):
        return "bark" if vars["timer"] in status.triggers else "pet"

    def execute(self, ctx, choice):
        if choice == "bark":
            ctx.vars["alarms"] += 1
            ctx.emit("alarm")
        else:
            ctx.vars["last"] = ctx.get_value("beat")


def main():
    d = Director(parse_model(MODEL), {"heart": Heart(), "dog": Dog()}, horizon_ns=120 * MS)
    d.initialize_system()
    print("watchdog trigger id:", d.threads["dog"].vars["timer"])
    while d.step():
        pass
    d.stop_system()
    trace = d.trace

    for m in trace.marks("timeout"):
        print(f"timeout {m.info['id']} expired at {m.time.t // MS} ms")
    end = trace.seal
    print("last beat seen:", at(trace, "Var:dog:last", end))
    print("alarms raised:", at(trace, "Var:dog:alarms", end))


if __name__ == "__main__":
    main()
