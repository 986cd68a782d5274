"""Gate-level netlist frontend.

Parses flattened structural Verilog (the subset produced by synthesis:
module/endmodule, scalar input/output/wire declarations, named-port
instances) and rewrites every instance onto a fixed technology-independent
cell set, so that downstream analysis never sees vendor cell names.

The frontend is deterministic: identical input text always yields identical
cell and net ids, assigned in declaration order.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path


class NetlistError(Exception):
    """Base class for all netlist frontend failures."""


class TechLibraryError(NetlistError):
    """Invalid technology library file."""


class VerilogSyntaxError(NetlistError):
    """Input text falls outside the supported structural subset."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MappingError(NetlistError):
    """An instance cannot be rewritten onto the technology-independent set."""


class MultiplyDrivenNetError(NetlistError):
    """A net with more than one driver.

    Only detectable once pin directions are known, i.e. during mapping, but
    it is always a hard error, never a silent condition.
    """


class CellKind(enum.IntEnum):
    """Technology-independent cell kinds.

    The declaration order is frozen: a kind's one-hot feature index is its
    integer value and must never change between runs or releases.
    """

    INV = 0
    BUF = 1
    AND = 2
    OR = 3
    NAND = 4
    NOR = 5
    XOR = 6
    XNOR = 7
    MUX2 = 8
    DFF = 9
    LATCH = 10
    INPUT_PORT = 11
    OUTPUT_PORT = 12
    CONST0 = 13
    CONST1 = 14

    @property
    def is_register(self) -> bool:
        return self in (CellKind.DFF, CellKind.LATCH)


KIND_COUNT = len(CellKind)

# Kinds a library entry may map to. Ports and constants are pseudo-cells
# inserted by the mapper itself, never by a library.
_LIBRARY_KINDS = frozenset(
    k for k in CellKind
    if k not in (CellKind.INPUT_PORT, CellKind.OUTPUT_PORT, CellKind.CONST0, CellKind.CONST1)
)

_LITERALS = ("1'b0", "1'b1")


@dataclass(frozen=True)
class LibCell:
    """One library entry: a vendor cell name's kind and pin roles.

    ``inputs`` are the ordered data inputs. ``clock`` and ``reset`` pins are
    recorded so register control nets can be tracked, but they never
    participate in data-dependency edges.
    """

    kind: CellKind
    inputs: tuple[str, ...]
    output: str
    clock: str | None = None
    reset: str | None = None

    @property
    def pins(self) -> frozenset[str]:
        extra = tuple(p for p in (self.clock, self.reset) if p is not None)
        return frozenset(self.inputs) | {self.output} | frozenset(extra)


@dataclass
class TechLibrary:
    """Mapping from vendor cell names to technology-independent cells."""

    entries: dict[str, LibCell] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)


def _reject_duplicate_keys(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise TechLibraryError(f"duplicate cell-name entry: {key!r}")
        out[key] = value
    return out


def _lib_cell_from_dict(name: str, spec) -> LibCell:
    if not isinstance(spec, dict):
        raise TechLibraryError(f"cell {name!r}: entry must be an object")
    kind_str = spec.get("kind")
    if kind_str not in CellKind.__members__:
        raise TechLibraryError(f"cell {name!r}: unknown kind {kind_str!r}")
    kind = CellKind[kind_str]
    if kind not in _LIBRARY_KINDS:
        raise TechLibraryError(f"cell {name!r}: kind {kind_str} is reserved for pseudo-cells")
    inputs = spec.get("inputs")
    if not isinstance(inputs, list) or not inputs or not all(isinstance(p, str) for p in inputs):
        raise TechLibraryError(f"cell {name!r}: 'inputs' must be a non-empty list of pin names")
    if len(set(inputs)) != len(inputs):
        raise TechLibraryError(f"cell {name!r}: duplicate input pin")
    output = spec.get("output")
    if not isinstance(output, str) or not output:
        raise TechLibraryError(f"cell {name!r}: 'output' must be a pin name")
    if output in inputs:
        raise TechLibraryError(f"cell {name!r}: output pin {output!r} also listed as input")
    clock = spec.get("clock")
    reset = spec.get("reset")
    for role, pin in (("clock", clock), ("reset", reset)):
        if pin is not None:
            if not isinstance(pin, str) or not pin:
                raise TechLibraryError(f"cell {name!r}: {role} pin must be a name")
            if pin in inputs or pin == output:
                raise TechLibraryError(f"cell {name!r}: {role} pin {pin!r} collides with data pins")
            if not kind.is_register:
                raise TechLibraryError(f"cell {name!r}: {role} pin on non-register kind {kind.name}")
    if kind.is_register and len(inputs) != 1:
        raise TechLibraryError(
            f"cell {name!r}: register kinds take exactly one data input, got {len(inputs)}"
        )
    extra = set(spec) - {"kind", "inputs", "output", "clock", "reset"}
    if extra:
        raise TechLibraryError(f"cell {name!r}: unknown fields {sorted(extra)}")
    return LibCell(kind, tuple(inputs), output, clock, reset)


def tech_library_from_dict(data: dict) -> TechLibrary:
    if not isinstance(data, dict):
        raise TechLibraryError("library root must be a JSON object")
    return TechLibrary({name: _lib_cell_from_dict(name, spec) for name, spec in data.items()})


def load_tech_library(path) -> TechLibrary:
    """Load and validate a technology library from its JSON file format."""
    text = Path(path).read_text()
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise TechLibraryError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    return tech_library_from_dict(data)


def default_tech_library() -> TechLibrary:
    """The generic library bundled with the package (INVX1, AND2X1, DFFX1,
    ...), matching the cells the synthetic generator emits."""
    from importlib import resources

    text = resources.files("statereg").joinpath("data/generic_lib.json").read_text()
    return tech_library_from_dict(json.loads(text, object_pairs_hook=_reject_duplicate_keys))


# --------------------------------------------------------------------------
# Structural Verilog parsing (pre-mapping)

@dataclass
class RawInstance:
    lib_cell: str
    name: str
    pins: dict[str, str]  # pin name -> net name or 1'b0 / 1'b1 literal
    line: int = 0


@dataclass
class RawNetlist:
    """Parsed netlist that still carries vendor cell names."""

    name: str
    inputs: list[str]
    outputs: list[str]
    wires: list[str]
    instances: list[RawInstance]


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>//[^\n]*|/\*.*?\*/)
      | (?P<escaped>\\[^\s]+)
      | (?P<literal>1'[bB][01])
      | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*)
      | (?P<punct>[().,;])
    """,
    re.VERBOSE | re.DOTALL,
)

_KEYWORDS = frozenset({"module", "endmodule", "input", "output", "wire"})


@dataclass
class _Token:
    kind: str  # 'ident', 'literal', a punctuation char, a keyword, or 'eof'
    value: str
    line: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    line = 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise VerilogSyntaxError(f"unexpected character {text[pos]!r}", line)
        group = m.lastgroup
        value = m.group()
        if group == "escaped":
            tokens.append(_Token("ident", value[1:], line))
        elif group == "literal":
            tokens.append(_Token("literal", value.lower(), line))
        elif group == "ident":
            kind = value if value in _KEYWORDS else "ident"
            tokens.append(_Token(kind, value, line))
        elif group == "punct":
            tokens.append(_Token(value, value, line))
        line += value.count("\n")
        pos = m.end()
    tokens.append(_Token("eof", "<end of input>", line))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> _Token:
        tok = self.advance()
        if tok.kind != kind:
            raise VerilogSyntaxError(f"expected {what or kind}, found {tok.value!r}", tok.line)
        return tok

    def parse_module(self) -> RawNetlist:
        self.expect("module")
        name = self.expect("ident", "module name").value
        header_ports: list[str] = []
        has_header = False
        if self.peek().kind == "(":
            has_header = True
            self.advance()
            if self.peek().kind != ")":
                while True:
                    header_ports.append(self.expect("ident", "port name").value)
                    if self.peek().kind == ",":
                        self.advance()
                        continue
                    break
            self.expect(")")
        self.expect(";")

        inputs: list[str] = []
        outputs: list[str] = []
        wires: list[str] = []
        declared: dict[str, str] = {}
        instances: list[RawInstance] = []

        while True:
            tok = self.peek()
            if tok.kind == "endmodule":
                self.advance()
                break
            if tok.kind in ("input", "output", "wire"):
                self._parse_declaration(tok.kind, inputs, outputs, wires, declared)
            elif tok.kind == "ident":
                instances.append(self._parse_instance())
            else:
                raise VerilogSyntaxError(
                    f"expected declaration, instance, or 'endmodule', found {tok.value!r}",
                    tok.line,
                )
        tail = self.advance()
        if tail.kind != "eof":
            raise VerilogSyntaxError("only a single module is supported", tail.line)

        if has_header:
            port_decls = set(inputs) | set(outputs)
            missing = [p for p in header_ports if p not in port_decls]
            if missing:
                raise VerilogSyntaxError(f"header ports without direction declaration: {missing}")
            undeclared = [p for p in inputs + outputs if p not in set(header_ports)]
            if undeclared:
                raise VerilogSyntaxError(f"ports missing from module header: {undeclared}")

        known = set(declared)
        for inst in instances:
            for pin, net in inst.pins.items():
                if net not in known and net not in _LITERALS:
                    raise VerilogSyntaxError(
                        f"instance {inst.name!r} pin .{pin}: reference to undeclared net {net!r}",
                        inst.line,
                    )
        return RawNetlist(name, inputs, outputs, wires, instances)

    def _parse_declaration(self, direction, inputs, outputs, wires, declared):
        self.advance()
        bucket = {"input": inputs, "output": outputs, "wire": wires}[direction]
        while True:
            tok = self.expect("ident", "net name")
            if tok.value in declared:
                raise VerilogSyntaxError(
                    f"net {tok.value!r} already declared as {declared[tok.value]}", tok.line
                )
            declared[tok.value] = direction
            bucket.append(tok.value)
            if self.peek().kind == ",":
                self.advance()
                continue
            break
        self.expect(";")

    def _parse_instance(self) -> RawInstance:
        cell_tok = self.expect("ident", "cell name")
        name_tok = self.expect("ident", "instance name")
        self.expect("(")
        pins: dict[str, str] = {}
        if self.peek().kind != ")":
            while True:
                tok = self.peek()
                if tok.kind != ".":
                    raise VerilogSyntaxError(
                        "positional port connections are not supported; use .pin(net)",
                        tok.line,
                    )
                self.advance()
                pin = self.expect("ident", "pin name").value
                self.expect("(")
                net_tok = self.advance()
                if net_tok.kind not in ("ident", "literal"):
                    raise VerilogSyntaxError(
                        f"pin .{pin}: expected a net or constant, found {net_tok.value!r}",
                        net_tok.line,
                    )
                self.expect(")")
                if pin in pins:
                    raise VerilogSyntaxError(
                        f"instance {name_tok.value!r}: pin .{pin} connected twice", net_tok.line
                    )
                pins[pin] = net_tok.value
                if self.peek().kind == ",":
                    self.advance()
                    continue
                break
        self.expect(")")
        self.expect(";")
        return RawInstance(cell_tok.value, name_tok.value, pins, cell_tok.line)


def parse_netlist(text: str) -> RawNetlist:
    """Parse structural Verilog into a raw (unmapped) netlist.

    Supported subset: one module, scalar net declarations, named-port
    instances, ``1'b0``/``1'b1`` literals, comments, escaped identifiers.
    """
    return _Parser(_tokenize(text)).parse_module()


# --------------------------------------------------------------------------
# Technology-independent mapped netlist

@dataclass(frozen=True)
class Net:
    id: int
    name: str


@dataclass(frozen=True)
class Cell:
    """A mapped cell. ``inputs`` are ordered data-input net ids; clock and
    reset nets are metadata only."""

    id: int
    kind: CellKind
    name: str
    inputs: tuple[int, ...] = ()
    output: int | None = None
    clock: int | None = None
    reset: int | None = None


@dataclass
class Netlist:
    """Technology-independent netlist: every cell carries a CellKind, and
    ports/constants appear as pseudo-cells so the cell set is closed."""

    name: str
    cells: list[Cell]
    nets: list[Net]
    input_ports: list[str]
    output_ports: list[str]


def map_to_independent(raw: RawNetlist, lib: TechLibrary) -> Netlist:
    """Rewrite a raw netlist onto the technology-independent cell set.

    Cell ids are assigned deterministically: input-port pseudo-cells in
    declaration order, then instances in declaration order, then constant
    pseudo-cells (0 before 1, if used), then output-port pseudo-cells.
    """
    net_ids: dict[str, int] = {}
    nets: list[Net] = []

    def intern_net(name: str) -> int:
        nid = net_ids.get(name)
        if nid is None:
            nid = len(nets)
            net_ids[name] = nid
            nets.append(Net(nid, name))
        return nid

    for name in raw.inputs + raw.outputs + raw.wires:
        intern_net(name)

    cells: list[Cell] = []

    def add_cell(kind, name, inputs=(), output=None, clock=None, reset=None) -> Cell:
        cell = Cell(len(cells), kind, name, tuple(inputs), output, clock, reset)
        cells.append(cell)
        return cell

    for port in raw.inputs:
        add_cell(CellKind.INPUT_PORT, port, output=net_ids[port])

    literal_used = {lit: False for lit in _LITERALS}
    for inst in raw.instances:
        entry = lib.entries.get(inst.lib_cell)
        if entry is None:
            raise MappingError(
                f"instance {inst.name!r}: cell {inst.lib_cell!r} not in technology library"
            )
        expected = entry.pins
        got = frozenset(inst.pins)
        if got != expected:
            raise MappingError(
                f"instance {inst.name!r} ({inst.lib_cell}): pin mismatch, "
                f"expected {sorted(expected)}, got {sorted(got)}"
            )

        def pin_net(pin: str) -> int:
            ref = inst.pins[pin]
            if ref in _LITERALS:
                literal_used[ref] = True
            return intern_net(ref)

        if inst.pins[entry.output] in _LITERALS:
            raise MappingError(
                f"instance {inst.name!r}: output pin .{entry.output} tied to a constant"
            )
        inputs = [pin_net(p) for p in entry.inputs]
        output = pin_net(entry.output)
        clock = pin_net(entry.clock) if entry.clock is not None else None
        reset = pin_net(entry.reset) if entry.reset is not None else None
        add_cell(entry.kind, inst.name, inputs, output, clock, reset)

    if literal_used["1'b0"]:
        add_cell(CellKind.CONST0, "$const0", output=net_ids["1'b0"])
    if literal_used["1'b1"]:
        add_cell(CellKind.CONST1, "$const1", output=net_ids["1'b1"])

    for port in raw.outputs:
        add_cell(CellKind.OUTPUT_PORT, port, inputs=(net_ids[port],))

    drivers: dict[int, list[str]] = {}
    for cell in cells:
        if cell.output is not None:
            drivers.setdefault(cell.output, []).append(cell.name)
    for nid, names in drivers.items():
        if len(names) > 1:
            raise MultiplyDrivenNetError(
                f"net {nets[nid].name!r} has {len(names)} drivers: {names}"
            )

    return Netlist(raw.name, cells, nets, list(raw.inputs), list(raw.outputs))


def registers_of(netlist: Netlist) -> list[int]:
    """All register (DFF/LATCH) cell ids, in deterministic id order."""
    return [c.id for c in netlist.cells if c.kind.is_register]


NETLIST_SCHEMA = "statereg.netlist/1"


def netlist_to_json(netlist: Netlist) -> dict:
    """Mapped-netlist dump with stable field order."""
    return {
        "schema": NETLIST_SCHEMA,
        "name": netlist.name,
        "input_ports": list(netlist.input_ports),
        "output_ports": list(netlist.output_ports),
        "nets": [{"id": n.id, "name": n.name} for n in netlist.nets],
        "cells": [
            {
                "id": c.id,
                "kind": c.kind.name,
                "name": c.name,
                "inputs": list(c.inputs),
                "output": c.output,
                "clock": c.clock,
                "reset": c.reset,
            }
            for c in netlist.cells
        ],
    }


def netlist_from_json(doc: dict) -> Netlist:
    from .jsonio import SchemaError, check_schema

    check_schema(doc, NETLIST_SCHEMA)
    try:
        nets = [Net(int(n["id"]), n["name"]) for n in doc["nets"]]
        cells = [
            Cell(
                int(c["id"]),
                CellKind[c["kind"]],
                c["name"],
                tuple(int(i) for i in c["inputs"]),
                None if c["output"] is None else int(c["output"]),
                None if c.get("clock") is None else int(c["clock"]),
                None if c.get("reset") is None else int(c["reset"]),
            )
            for c in doc["cells"]
        ]
        netlist = Netlist(doc["name"], cells, nets, list(doc["input_ports"]), list(doc["output_ports"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed netlist document: {exc}") from exc
    for i, c in enumerate(netlist.cells):
        if c.id != i:
            raise SchemaError(f"cell ids not consecutive at index {i}")
    return netlist
