import numpy as np
import pytest

from shelfmem.core import GridSpec, SemanticMap, belief_from_map
from shelfmem.simulator import Scene, SceneObject
from shelfmem import geometry as geo

# filled by the acceptance suite, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def box(class_id, x, y, w=0.1, d=0.1, h=0.1, yaw=0.0):
    return SceneObject(class_id, tuple(map(tuple, geo.rectangle(w, d))), h, x, y, yaw)


def certain(spec, m: SemanticMap, strength=1e15):
    return belief_from_map(spec, m, strength)


@pytest.fixture
def spec():
    return GridSpec()


@pytest.fixture
def small_spec():
    return GridSpec(dims=(10, 8, 5), n_classes=4)


@pytest.fixture
def one_box_scene(spec):
    return Scene(spec, (box(3, 0.4, 0.2),))


@pytest.fixture(scope="session")
def scenes_high():
    from shelfmem.io import bundled_scenes
    return bundled_scenes("high_")


@pytest.fixture(scope="session")
def scenes_low():
    from shelfmem.io import bundled_scenes
    return bundled_scenes("low_")


@pytest.fixture(scope="session")
def scenes_all(scenes_high, scenes_low):
    return scenes_high + scenes_low


def tree_bytes(root) -> dict:
    """Relative path -> file bytes for every file under ``root``."""
    from pathlib import Path
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}
