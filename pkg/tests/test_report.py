import numpy as np

from coherent_capm.report import Table, fmt, kv_table, render_csv, render_text


def test_fmt():
    assert fmt(None) == "-"
    assert fmt(-0.0) == "0"
    assert fmt(np.float64(1 / 3)) == "0.3333333333"
    assert fmt(123456789012.0) == "1.23456789e+11"
    assert fmt(np.int64(7)) == "7"
    assert fmt(True) == "yes"
    assert fmt("abc") == "abc"


def test_render_text_aligns_numbers_right():
    t = Table("demo", ["asset", "value"])
    t.add("a", 1.5)
    t.add("long", -22.25)
    lines = render_text([t]).splitlines()
    assert lines[0] == "== demo"
    assert lines[2].endswith("   1.5")
    assert lines[3].endswith("-22.25")
    assert len(lines[2]) == len(lines[3])


def test_render_csv():
    a = kv_table("one", [("x", 1.0)])
    b = Table("two", ["p", "q"])
    b.add(1, None)
    assert render_csv([a, b]) == "# one\nkey,value\nx,1\n\n# two\np,q\n1,-\n"
