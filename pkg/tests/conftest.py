"""Shared test plumbing: a capture-proof line writer for acceptance results."""

_config = None


def pytest_configure(config):
    global _config
    _config = config


def announce(line: str) -> None:
    """Write a status line to the real terminal, bypassing output capture."""
    terminal = (
        _config.pluginmanager.get_plugin("terminalreporter") if _config else None
    )
    if terminal is not None:
        terminal.write_line(line)
    else:
        print(line)
