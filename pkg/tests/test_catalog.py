import pytest

from pshlab import catalog
from pshlab.pipelines import SCHEMAS, resolve_config


def test_entry_count():
    names = [e.name for e in catalog.entries()]
    assert len(names) >= 12
    assert len(set(names)) == len(names)


def test_every_entry_is_a_valid_config():
    for e in catalog.entries():
        assert e.command in SCHEMAS
        assert e.claim and e.title
        resolve_config(e.command, {"catalog": e.name}, {})


def test_show_hartogs():
    text = catalog.show("hartogs")
    assert "psh-scan" in text and "exp(2*re(t))" in text


def test_show_tau_ladder():
    e = catalog.get("tau-log")
    assert e.command == "lelong"
    assert "{tau}" in e.params["phi"] and e.params["tau_ladder"]
    assert "tau_ladder" in catalog.show("tau-log")


def test_unknown():
    with pytest.raises(catalog.CatalogError, match="unknown catalog entry"):
        catalog.get("mandelbrot")
    with pytest.raises(KeyError):
        catalog.show("mandelbrot")
