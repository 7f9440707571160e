"""Locations of the fixture profiles and scenarios shipped in the package."""

from __future__ import annotations

from pathlib import Path

_ROOT = Path(__file__).resolve().parent

PROFILE_DIR = _ROOT / "profiles"
SCENARIO_DIR = _ROOT / "scenarios"


def profile_path(name: str) -> Path:
    """Path of a shipped profile by name ("bluerobin-8dof", ...)."""
    path = PROFILE_DIR / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(
            f"no shipped profile '{name}' (have: {', '.join(list_profiles())})"
        )
    return path


def scenario_path(name: str) -> Path:
    """Path of a shipped scenario by name ("pick_place", ...)."""
    path = SCENARIO_DIR / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(
            f"no shipped scenario '{name}' (have: {', '.join(list_scenarios())})"
        )
    return path


def list_profiles() -> list[str]:
    return sorted(p.stem for p in PROFILE_DIR.glob("*.json"))


def list_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))
