import json

import pytest

from statereg.netlist import TechLibrary, tech_library_from_dict


@pytest.fixture(scope="session")
def tiny_lib() -> TechLibrary:
    """Just enough cells for the hand-written netlists in the tests."""
    return tech_library_from_dict(json.loads("""
    {
      "INVX1":  {"kind": "INV",  "inputs": ["A"], "output": "Y"},
      "BUFX1":  {"kind": "BUF",  "inputs": ["A"], "output": "Y"},
      "AND2X1": {"kind": "AND",  "inputs": ["A", "B"], "output": "Y"},
      "OR2X1":  {"kind": "OR",   "inputs": ["A", "B"], "output": "Y"},
      "XOR2X1": {"kind": "XOR",  "inputs": ["A", "B"], "output": "Y"},
      "DFFX1":  {"kind": "DFF",  "inputs": ["D"], "output": "Q", "clock": "CK"},
      "LATCHX1": {"kind": "LATCH", "inputs": ["D"], "output": "Q", "clock": "EN"}
    }
    """))
