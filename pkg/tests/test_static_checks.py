import pytest

from evoforge.errors import ParseFailure
from evoforge.static_checks import (
    CheckStanza,
    parse_stanza,
    render_stanza,
    scan_query_for_api,
    static_check,
    token_present,
)

from conftest import make_api


def test_stanza_round_trip():
    line = render_stanza(["alpha::frob_runs", "beta::quell_cells"], ["omega::old_thing"])
    assert line == "// EVO-CHECK require=alpha::frob_runs,beta::quell_cells forbid=omega::old_thing"
    stanza = parse_stanza(line)
    assert stanza.require == ("alpha::frob_runs", "beta::quell_cells")
    assert stanza.forbid == ("omega::old_thing",)


def test_stanza_with_empty_forbid():
    line = render_stanza(["alpha::frob_runs"])
    assert line.endswith("forbid=")
    assert parse_stanza(line).forbid == ()


def test_stanza_read_from_whole_program():
    program = render_stanza(["alpha::frob_runs"]) + "\nfn main() {}\n"
    assert parse_stanza(program).require == ("alpha::frob_runs",)


@pytest.mark.parametrize("bad", [
    "fn main() {}",
    "// EVO-CHECK forbid=x",
    "// EVO-CHECK require= forbid=",
    "// evo-check require=a forbid=",
    "\n// EVO-CHECK require=a forbid=",
])
def test_malformed_stanza_rejected(bad):
    with pytest.raises(ParseFailure):
        parse_stanza(bad)


def test_token_presence_boundaries():
    assert token_present("let y = alpha::frob_runs(3);", "alpha::frob_runs")
    assert token_present("let y = frob_runs(3);", "alpha::frob_runs")
    assert not token_present("let y = frob_runs_fast(3);", "alpha::frob_runs")
    assert not token_present("let y = xalpha::frob_runs_x(3);", "alpha::frob_runs")


def test_static_check_enforces_both_lists():
    stanza = CheckStanza(("alpha::frob_runs",), ("omega::old_thing",))
    assert static_check("pub fn wrap(x: i64) -> i64 { alpha::frob_runs(x) }", stanza)
    assert not static_check("pub fn wrap(x: i64) -> i64 { omega::old_thing(x) }", stanza)
    assert not static_check(
        "pub fn wrap(x: i64) -> i64 { alpha::frob_runs(omega::old_thing(x)) }", stanza
    )
    assert not static_check("pub fn wrap(x: i64) -> i64 { x }", stanza)


def test_query_scan_catches_leaks():
    api = make_api("alpha::frob_runs")
    assert scan_query_for_api("Use alpha::frob_runs to double a reading.", api)
    assert scan_query_for_api("Use std::alpha::frob_runs here.", api)
    assert scan_query_for_api("The frob_runs routine doubles input.", api)
    assert not scan_query_for_api("Write a routine that doubles a reading.", api)
    assert not scan_query_for_api("Consider frob runs as two words.", api)
    assert not scan_query_for_api("A frob_runs_fast helper exists elsewhere.", api)
