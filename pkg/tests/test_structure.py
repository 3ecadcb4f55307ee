"""
Simple test to verify the project structure is working correctly.
"""

import sys
from pathlib import Path


def test_project_structure():
    """Test that the project structure is properly organized."""
    project_root = Path(__file__).parent.parent

    assert (project_root / "src" / "prevmap").exists(), "Source package should exist"
    assert (project_root / "tests").exists(), "Tests directory should exist"
    assert (project_root / "pyproject.toml").exists(), "pyproject.toml should exist"

    for layer in ("core", "services", "cli", "utils"):
        assert (project_root / "src" / "prevmap" / layer / "__init__.py").exists(), f"{layer} package missing"

    # One CLI module per command family
    commands = project_root / "src" / "prevmap" / "cli" / "commands"
    for name in ("simulate", "fit", "pipeline", "regions", "gof", "efficiency"):
        assert (commands / f"{name}.py").exists(), f"cli/commands/{name}.py should exist"


def test_imports_configured():
    """Test that import paths are configured correctly."""
    project_root = Path(__file__).parent.parent
    sys.path.insert(0, str(project_root / "src"))

    import prevmap
    from prevmap.cli.app import app

    assert prevmap.__version__
    registered = {command.name for command in app.registered_commands}
    assert registered == {"simulate", "fit", "test", "pipeline", "regions", "gof", "are", "power"}


if __name__ == "__main__":
    test_project_structure()
    test_imports_configured()
    print("✓ All structure tests passed!")
