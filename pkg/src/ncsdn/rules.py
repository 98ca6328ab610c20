"""Flow rules: the instructions a controller installs on data-plane nodes."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

ACTIONS = ("forward", "encode", "recode", "decode")
_ORDER = {a: i for i, a in enumerate(ACTIONS)}


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class FlowRule:
    """One instruction at ``node`` for traffic of ``flow``.

    ``forward`` rules are per destination sink and carry a split weight;
    ``encode`` lists its out-links in emission order; ``decode`` sits at a
    sink.
    """

    node: str
    flow: str
    action: str
    sink: str = ""
    out_link: tuple = ()
    weight: float = 1.0
    generation_size: int = 0
    k: int = 0
    field: str = ""
    out_links: tuple = ()
    priority: int = 0

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise RuleError(f"unknown action {self.action!r}")
        if self.action == "forward" and not self.out_link:
            raise RuleError("forward rule needs an out_link")
        if self.action == "encode" and (self.generation_size < 1 or self.k < 1):
            raise RuleError("encode rule needs generation_size and k >= 1")

    def sort_key(self):
        return (self.flow, self.node, _ORDER[self.action], self.sink, self.out_link,
                self.out_links)

    def line(self) -> str:
        head = f"{self.flow} {self.node} {self.action}"
        if self.action == "forward":
            return (f"{head} sink={self.sink} out={self.out_link[0]}->{self.out_link[1]} "
                    f"weight={self.weight:.6f} prio={self.priority}")
        if self.action == "encode":
            outs = ",".join(f"{a}->{b}" for a, b in self.out_links)
            return (f"{head} g={self.generation_size} k={self.k} field={self.field} "
                    f"outs={outs} prio={self.priority}")
        if self.action == "recode":
            return f"{head} field={self.field} prio={self.priority}"
        return f"{head} sink={self.sink} g={self.generation_size} prio={self.priority}"


def canonical(rules) -> list:
    return sorted(rules, key=FlowRule.sort_key)


def dump_rules(rules) -> str:
    """One rule per line in canonical order."""
    return "".join(r.line() + "\n" for r in canonical(rules))


def validate_rules(rules, dead_links=()) -> None:
    weights = defaultdict(float)
    decodes = defaultdict(int)
    dead = set(dead_links)
    for r in rules:
        if r.action == "forward":
            weights[(r.node, r.flow, r.sink)] += r.weight
            if r.out_link in dead:
                raise RuleError(f"{r.line()} references dead link")
        elif r.action == "decode":
            decodes[(r.node, r.flow)] += 1
        elif r.action == "encode":
            for l in r.out_links:
                if l in dead:
                    raise RuleError(f"{r.line()} references dead link")
    for key, total in weights.items():
        if abs(total - 1.0) > 1e-9:
            raise RuleError(f"forward weights at {key} sum to {total}")
    for key, count in decodes.items():
        if count != 1:
            raise RuleError(f"{count} decode rules for {key}")
