import pandas as pd

from checkpoint_boosting._display import _DisplayOptions, _DisplayType, display_options


def test_display_opts_singleton():
    opts1 = _DisplayOptions()
    opts2 = _DisplayOptions()
    assert opts1 is opts2
    assert opts1 is display_options


def test_display_type_regular_repl():
    assert display_options.display_type == _DisplayType.REGULAR_REPL
    assert not display_options.is_notebook


def test_format_table():
    """
    Test that floats keep at least 6 significant digits and missing values print as '-'
    """
    table = pd.DataFrame({"step": [50, 100], "error": [0.123456789, 1 / 3], "test_error": [None, 0.25]})
    text = display_options.format_table(table)
    assert "0.12345679" in text
    assert "0.33333333" in text
    assert " -" in text
    assert "<table" in display_options.html_table(table)


def test_format_empty_table():
    assert "Empty DataFrame" in display_options.format_table(pd.DataFrame(columns=["step"]))
