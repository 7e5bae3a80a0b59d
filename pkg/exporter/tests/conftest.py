import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the exporter acceptance verdict after the run."""
    mod = sys.modules.get("test_exporter_acceptance")
    if mod is None or not getattr(mod, "VERDICTS", None):
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("exporter acceptance criteria:")
    for line in mod.VERDICTS:
        terminalreporter.write_line("  " + line)
