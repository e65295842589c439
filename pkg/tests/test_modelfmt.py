import pytest
from hypothesis import given, settings

from cpsvuln.modelfmt import (
    Connection,
    ConnectionKind,
    ModelSyntaxError,
    ModelValidationError,
    SystemModel,
    check_model,
    join_values,
    load_example_fcs,
    parse_model,
    serialize_model,
    split_values,
    validate_model,
)
from cpsvuln.schema import Category, CyberComponent, TaxonomicRecord

from generators import models

HEADER = "[model] Tiny\n"


def cyber(ident, comm=("UART",), entry=()):
    return CyberComponent(ident, ident.title(), True,
                          TaxonomicRecord(device_name=[f"{ident} board"], communication=comm, entry_points=entry))


def test_fixture_shape():
    model = load_example_fcs()
    assert model.name == "Flight Control System"
    assert len(model.components) == 12
    assert len(model.connections) == 20
    gps = model.component("gps")
    assert gps.record.hardware == ("Mediatek MTK 3339 chipset",)
    assert gps.record.communication == {"I2C", "RS232", "UART", "RF"}
    assert gps.record.entry_points == {"RF"}
    assert model.component("radio").record.entry_points == {"RF"}


def test_fixture_round_trip():
    model = load_example_fcs()
    assert parse_model(serialize_model(model)) == model


def test_minimal_document():
    model = parse_model(HEADER + "[component] a\ndevice_name = A\n")
    comp = model.component("a")
    assert comp.is_cyber and comp.record.device_name == ("A",)
    assert comp.record.values(Category.COMMUNICATION) == ()


def test_comments_and_blank_lines():
    doc = "# lead\n\n" + HEADER + "  # indented comment\n[component] a\ndevice_name = A\n"
    assert parse_model(doc).component_ids == ("a",)


def test_quoted_values():
    assert split_values('"a, b", c') == ["a, b", "c"]
    assert split_values(join_values(['say "hi"', "x,y", "plain"])) == ['say "hi"', "x,y", "plain"]


@pytest.mark.parametrize("doc, line, column", [
    ("[component] a\n", 1, 1),
    (HEADER + "[component] a\nbogus = 1\n", 3, 1),
    (HEADER + "[component] a\ndevice_name = A\ndevice_name = B\n", 4, 1),
    (HEADER + "[widget] a\n", 2, 1),
    (HEADER + "[connection] a => b\n", 2, 14),
    (HEADER + "[component] a\n  is_cyber = maybe\n", 3, 13),
    (HEADER + "[component] 1a\n", 2, 13),
    (HEADER + "[component] a\nno equals here\n", 3, 1),
    (HEADER + "[component] a\ncommunication = I2C, I2C\n", 3, 16),
    (HEADER + "[connection] a -> b\nkind = optical\n", 3, 7),
    (HEADER + HEADER, 2, 1),
])
def test_syntax_errors_carry_position(doc, line, column):
    with pytest.raises(ModelSyntaxError) as info:
        parse_model(doc)
    assert (info.value.line, info.value.column) == (line, column)


def test_unknown_reference_reported():
    doc = HEADER + "[component] a\ndevice_name = A\ncommunication = UART\n[connection] a -> ghost\nprotocols = UART\n"
    with pytest.raises(ModelValidationError) as info:
        parse_model(doc)
    assert info.value.unknown_references == ("ghost",)
    assert any("unknown component 'ghost'" in v for v in info.value.violations)


def test_validation_error_lists_every_violation():
    doc = HEADER + (
        "[component] a\ndevice_name = A\nentry_points = RF\n"
        "[component] s\nis_cyber = false\nhardware = motor\n"
    )
    with pytest.raises(ModelValidationError) as info:
        parse_model(doc)
    assert len(info.value.violations) == 2


def test_connection_rules():
    a, b = cyber("a"), cyber("b", comm=("SPI",))
    model = SystemModel("m", (a, b), (
        Connection("a", "a", ConnectionKind.DIGITAL, {"UART"}),
        Connection("a", "b", ConnectionKind.DIGITAL, {"UART"}),
        Connection("b", "a", ConnectionKind.DIGITAL, frozenset()),
    ))
    violations = validate_model(model)
    assert any("self-loop" in v for v in violations)
    assert any("UART not in communication of b" in v for v in violations)
    assert any("at least one protocol" in v for v in violations)


def test_duplicate_connection_rejected():
    a, b = cyber("a"), cyber("b")
    conn = Connection("a", "b", ConnectionKind.DIGITAL, {"UART"})
    assert any("duplicate connection" in v for v in validate_model(SystemModel("m", (a, b), (conn, conn))))


def test_duplicate_component_rejected():
    with pytest.raises(ModelValidationError):
        check_model(SystemModel("m", (cyber("a"), cyber("a"))))


def test_canonical_order_independent_of_input_order():
    a, b = cyber("a"), cyber("b")
    c1 = Connection("b", "a", ConnectionKind.DIGITAL, {"UART"})
    c2 = Connection("a", "b", ConnectionKind.DIGITAL, {"UART"})
    assert SystemModel("m", (b, a), (c1, c2)) == SystemModel("m", (a, b), (c2, c1))


@settings(max_examples=100, deadline=None)
@given(models())
def test_serialize_parse_round_trip(model):
    assert validate_model(model) == []
    assert parse_model(serialize_model(model)) == model
