from enum import Enum

import pandas as pd

FLOAT_FORMAT = "%.8g"


class _DisplayType(Enum):
    JUPYTER_NOTEBOOK = 0
    IPYTHON_REPL = 1
    REGULAR_REPL = 2


class _DisplayOptions:
    """
    Singleton class holding how run tables are rendered.
    """

    _instance = None

    def __new__(cls, *args, **kwargs):
        if not cls._instance:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if hasattr(self, "initialized"):
            return None
        self.float_format = FLOAT_FORMAT
        self.initialized = True

    def __str__(self):
        return f"DisplayOptions(display_type={self.display_type}, float_format={self.float_format!r})"

    def __repr__(self):
        return str(self)

    def format_table(self, table: pd.DataFrame) -> str:
        """
        Render a table as plain text with every float printed to ``float_format`` (at least 6
        significant digits by default). Missing values print as ``-``.
        """
        if table.empty:
            return table.to_string()
        return table.to_string(
            float_format=lambda value: self.float_format % value, na_rep="-", index=False
        )

    def html_table(self, table: pd.DataFrame) -> str:
        return (
            "<div style='max-height: 300px; overflow: auto; width: fit-content'>"
            f"{table.to_html(float_format=lambda value: self.float_format % value, na_rep='-', index=False)}"
            "</div>"
        )

    @property
    def display_type(self) -> _DisplayType:
        try:
            # Check for Jupyter Notebook
            ipy = get_ipython()  # noqa: F821
            if hasattr(ipy, "kernel"):
                return _DisplayType.JUPYTER_NOTEBOOK
            elif hasattr(ipy, "config"):
                return _DisplayType.IPYTHON_REPL
        except NameError:
            pass
        return _DisplayType.REGULAR_REPL

    @property
    def is_notebook(self) -> bool:
        return self.display_type == _DisplayType.JUPYTER_NOTEBOOK


display_options = _DisplayOptions()
