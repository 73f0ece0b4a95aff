from __future__ import annotations

from engine.base import ProtocolKind, ProtocolSpec, Table1Row

PROTOCOL_REGISTRY = {
    "susd": ProtocolSpec(
        name="susd",
        kind=ProtocolKind.SUSD_RANDOMIZED,
        dimension=2,
        unambiguous=True,
        readout_order=("m+1", "m-1"),
        table1=Table1Row(efficiency=0.846, multipositive=0.01, error_low=0.035, error_high=0.035, error_text="~3.5"),
    ),
    "idp": ProtocolSpec(
        name="idp",
        kind=ProtocolKind.IDP,
        dimension=3,
        unambiguous=True,
        readout_order=("m0", "m-1", "m+1"),
        table1=Table1Row(efficiency=0.902, multipositive=0.102, error_low=0.04, error_high=0.075, error_text="4-7.5"),
    ),
    "helstrom": ProtocolSpec(
        name="helstrom",
        kind=ProtocolKind.HELSTROM,
        dimension=2,
        unambiguous=False,
        readout_order=("m+1", "m-1"),
        table1=Table1Row(efficiency=0.831, multipositive=0.011, error_low=0.035, error_high=0.035, error_text=">3.5"),
    ),
}

# Sorted output order of sweep rows.
PROTOCOL_ORDER = ("helstrom", "idp", "susd")


def get_spec(name: str) -> ProtocolSpec:
    try:
        return PROTOCOL_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; expected one of {sorted(PROTOCOL_REGISTRY)}") from None


def family_of(kind: ProtocolKind) -> str:
    """Registry name for a protocol kind; the fixed-basis SUSD variants share 'susd'."""
    kind = ProtocolKind(kind)
    if kind is ProtocolKind.IDP:
        return "idp"
    if kind is ProtocolKind.HELSTROM:
        return "helstrom"
    return "susd"
