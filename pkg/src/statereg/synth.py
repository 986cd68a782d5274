"""Seeded synthetic benchmark generator.

Emits a flattened structural Verilog netlist containing one one-hot FSM and
a word-organized datapath, plus ground truth naming the FSM registers.

The FSM gives every state register its own next-state decode shape (gate
kinds, arities, feedback taps drawn without replacement from a recipe
space), so state registers have near-unique fan-in structure. Datapath
words apply one shared gate-tree recipe to all bits of a word, with source
taps rotated per bit, so the bits of a word have isomorphic fan-in cones;
recipes vary across words. Register-to-register paths always run through
trees whose register leaves sit at a uniform depth (``comb_depth``), with
primary inputs allowed at any depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evalharness import GroundTruth
from .classify import Label

_PIN_NAMES = ("A", "B", "C", "D")
_VARIADIC_KINDS = ("AND", "OR", "NAND", "NOR")   # have 2/3/4-input library cells
_BINARY_KINDS = ("XOR", "XNOR")
_GATE_POOL = ("XOR", "AND", "OR", "NAND", "XNOR", "NOR")
_FSM_KINDS = ("AND", "OR", "NAND", "NOR", "XOR", "XNOR")


@dataclass
class SynthSpec:
    seed: int = 0
    fsm_states: int = 4
    data_regs: int = 16
    datapath_width: int = 8
    comb_depth: int = 3
    fanin_max: int = 4

    def __post_init__(self):
        if self.fsm_states < 0 or self.data_regs < 0:
            raise ValueError("register counts must be nonnegative")
        if self.datapath_width < 1:
            raise ValueError("datapath_width must be >= 1")
        if self.comb_depth < 1:
            raise ValueError("comb_depth must be >= 1")
        if self.fanin_max < 1:
            raise ValueError("fanin_max must be >= 1")

    @property
    def design_name(self) -> str:
        return f"synth_f{self.fsm_states}_d{self.data_regs}_s{self.seed}"


class _Builder:
    def __init__(self, clk: str | None):
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.wires: list[str] = []
        self.lines: list[str] = []
        self.gate_count = 0
        self.clk = clk

    def input(self, name: str) -> str:
        self.inputs.append(name)
        return name

    def output(self, name: str) -> str:
        self.outputs.append(name)
        return name

    def fresh_wire(self) -> str:
        name = f"n{len(self.wires)}"
        self.wires.append(name)
        return name

    def gate(self, kind: str, ins: list[str], out: str | None = None) -> str:
        if kind == "INV":
            lib = "INVX1"
        elif kind == "BUF":
            lib = "BUFX1"
        elif kind in _VARIADIC_KINDS:
            lib = f"{kind}{len(ins)}X1"
        elif kind in _BINARY_KINDS:
            lib = f"{kind}2X1"
        else:
            raise ValueError(f"no library cell for kind {kind} arity {len(ins)}")
        if out is None:
            out = self.fresh_wire()
        pins = ", ".join(f".{_PIN_NAMES[i]}({net})" for i, net in enumerate(ins))
        self.lines.append(f"  {lib} g{self.gate_count} ({pins}, .Y({out}));")
        self.gate_count += 1
        return out

    def mux(self, a: str, b: str, sel: str, out: str | None = None) -> str:
        if out is None:
            out = self.fresh_wire()
        self.lines.append(f"  MUX2X1 g{self.gate_count} (.A({a}), .B({b}), .S({sel}), .Y({out}));")
        self.gate_count += 1
        return out

    def dff(self, name: str, d: str, q: str) -> None:
        self.lines.append(f"  DFFX1 {name} (.D({d}), .CK({self.clk}), .Q({q}));")

    def render(self, module: str) -> str:
        ports = ([self.clk] if self.clk else []) + self.inputs + self.outputs
        out = [f"module {module} ({', '.join(ports)});"]
        if self.clk:
            out.append(f"  input {self.clk};")
        for name in self.inputs:
            out.append(f"  input {name};")
        for name in self.outputs:
            out.append(f"  output {name};")
        for name in self.wires:
            out.append(f"  wire {name};")
        out.append("")
        out.extend(self.lines)
        out.append("endmodule")
        return "\n".join(out) + "\n"


def _decode_recipe(index: int):
    """Mixed-radix decode of an FSM next-state recipe: two first-level gate
    kinds, a top combiner, and three shape bits."""
    left, index = _FSM_KINDS[index % 6], index // 6
    right, index = _FSM_KINDS[index % 6], index // 6
    top, index = _FSM_KINDS[index % 6], index // 6
    invert, index = index % 2, index // 2
    self_feedback, index = index % 2, index // 2
    wide = index % 2
    return left, right, top, bool(invert), bool(self_feedback), bool(wide)


def _build_fsm(b: _Builder, rng: np.random.Generator, spec: SynthSpec,
               ctl: list[str]) -> list[str]:
    s = spec.fsm_states
    q = [b.fresh_wire() for _ in range(s)]
    recipe_ids = rng.choice(6 * 6 * 6 * 2 * 2 * 2, size=s, replace=False)
    for i in range(s):
        left, right, top, invert, self_fb, wide = _decode_recipe(int(recipe_ids[i]))
        a = b.gate(left, [q[(i - 1) % s], ctl[i % len(ctl)]])
        second = q[i] if self_fb else q[(i + 2) % s]
        c = ctl[(i + 1) % len(ctl)]
        if invert:
            c = b.gate("INV", [c])
        bb = b.gate(right, [second, c])
        if wide and spec.fanin_max >= 3 and top in _VARIADIC_KINDS:
            d = b.gate(top, [a, bb, q[(i + 3) % s]])
        else:
            d = b.gate(top, [a, bb])
        b.dff(f"fsm_r{i}", d, q[i])
    status = b.output("fsm_status")
    b.gate("OR", [q[0], q[min(1, s - 1)]], out=status)
    return q


def _build_tree_recipe(rng: np.random.Generator, depth: int, spec: SynthSpec,
                       allow_mux: bool):
    """Random gate-tree recipe. Register-source leaves ("src") occur only at
    depth 0, so every register tap of an instantiated tree sits exactly
    ``depth`` levels below the root; port leaves ("in") may appear anywhere.
    """
    if depth == 0:
        return ("src", int(rng.integers(3)))
    if allow_mux and spec.fanin_max >= 3 and rng.random() < 0.12:
        kind, extra = "MUX2", 1
    else:
        kind = _GATE_POOL[int(rng.integers(len(_GATE_POOL)))]
        wide = (
            spec.fanin_max >= 3 and kind in _VARIADIC_KINDS and rng.random() < 0.25
        )
        extra = 2 if wide else 1
    children = [_build_tree_recipe(rng, depth - 1, spec, allow_mux)]
    for _ in range(extra):
        if rng.random() < 0.45:
            children.append(_build_tree_recipe(rng, depth - 1, spec, allow_mux))
        else:
            children.append(("in", int(rng.integers(6))))
    return (kind, children)


def _instantiate_tree(b: _Builder, recipe, bit: int, sources: list[str],
                      ctl: list[str], din: list[str], sel: str,
                      rotate_din: bool) -> str:
    tag = recipe[0]
    if tag == "src":
        return sources[(bit + recipe[1]) % len(sources)]
    if tag == "in":
        k = recipe[1]
        if k < 3 or not din or not rotate_din:
            return ctl[k % len(ctl)]
        return din[(bit + k) % len(din)]
    kind, children = recipe
    ins = [
        _instantiate_tree(b, child, bit, sources, ctl, din, sel, rotate_din)
        for child in children
    ]
    if kind == "MUX2":
        return b.mux(ins[0], ins[1], sel)
    return b.gate(kind, ins)


def _build_datapath(b: _Builder, rng: np.random.Generator, spec: SynthSpec,
                    ctl: list[str], sel: str, state_q: list[str]) -> list[str]:
    width = spec.datapath_width
    full_words = spec.data_regs // width
    remainder = spec.data_regs % width
    reg_names: list[str] = []

    din = [b.input(f"din{i}") for i in range(width)] if full_words else []
    n_variants = max(1, min(3, full_words))
    variants = [
        _build_tree_recipe(rng, spec.comb_depth, spec, allow_mux=bool(state_q))
        for _ in range(n_variants)
    ]

    prev_q = din
    for w in range(full_words):
        last = w == full_words - 1
        q = [
            b.output(f"dout{i}") if last else b.fresh_wire()
            for i in range(width)
        ]
        for bit in range(width):
            d = _instantiate_tree(
                b, variants[w % n_variants], bit, prev_q, ctl, din, sel,
                rotate_din=True,
            )
            b.dff(f"dp_w{w}_b{bit}", d, q[bit])
            reg_names.append(f"dp_w{w}_b{bit}")
        prev_q = q

    if remainder:
        # Self-fed accumulator word: taps rotate over its own outputs, so the
        # word stays internally symmetric and leaves other words untouched.
        recipe = _build_tree_recipe(rng, spec.comb_depth, spec, allow_mux=bool(state_q))
        q = [b.output(f"rout{i}") for i in range(remainder)]
        for bit in range(remainder):
            d = _instantiate_tree(b, recipe, bit, q, ctl, [], sel, rotate_din=False)
            b.dff(f"dp_w{full_words}_b{bit}", d, q[bit])
            reg_names.append(f"dp_w{full_words}_b{bit}")
    return reg_names


def generate_synthetic(spec: SynthSpec) -> tuple[str, GroundTruth]:
    """Generate (netlist text, ground truth) for the given specification."""
    rng = np.random.default_rng(spec.seed)
    any_regs = spec.fsm_states > 0 or spec.data_regs > 0
    b = _Builder(clk="clk" if any_regs else None)

    ctl = [b.input(f"ctl{i}") for i in range(3)] if any_regs else []

    state_q: list[str] = []
    if spec.fsm_states > 0:
        state_q = _build_fsm(b, rng, spec, ctl)
        sel = b.gate("AND", [state_q[0], ctl[0]])
    else:
        sel = ctl[0] if ctl else ""

    data_names: list[str] = []
    if spec.data_regs > 0:
        data_names = _build_datapath(b, rng, spec, ctl, sel, state_q)

    state_names = [f"fsm_r{i}" for i in range(spec.fsm_states)]
    all_names = state_names + data_names
    truth = GroundTruth(
        spec.design_name,
        {name: (Label.STATE if name in set(state_names) else Label.DATA) for name in all_names},
    )
    return b.render(spec.design_name), truth
