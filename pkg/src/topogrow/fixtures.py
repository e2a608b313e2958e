"""Built-in benchmark fixtures at desk scale.

Each fixture supplies raw config strings (mesh, supports, loads and a few
defaults); explicit config keys always win. Meshes keep the aspect ratios
of the published problems but stay small enough for laptop runs.
"""

FIXTURES = {
    # cantilever clamped on the left wall, upward unit forces on both right
    # corners, one load case per corner so sensitivities accumulate
    "cantilever_2corner": {
        "mesh.nelx": "150",
        "mesh.nely": "30",
        "supports": "left_wall",
        "load.1": "150,30,y,1.0",
        "load.2": "150,0,y,1.0",
    },
    # cantilever clamped on the right wall, downward unit force on the
    # upper left corner
    "cantilever_tip": {
        "mesh.nelx": "120",
        "mesh.nely": "40",
        "supports": "right_wall",
        "load.1": "0,40,y,-1.0",
    },
    # beam clamped on both walls, downward unit force at the top center
    "bifixed_center": {
        "mesh.nelx": "180",
        "mesh.nely": "30",
        "supports": "left_wall; right_wall",
        "load.1": "90,30,y,-1.0",
    },
    # three-point bending: pin and roller at the bottom corners, downward
    # unit force at the top center; stiffer material keeps the solid-domain
    # compliance well below the compliance thresholds used in growth studies
    "threepoint": {
        "mesh.nelx": "120",
        "mesh.nely": "40",
        "supports": "0,0,both; 120,0,y",
        "load.1": "60,40,y,-1.0",
        "material.e0": "4.0",
    },
}


def fixture_defaults(name: str) -> dict:
    try:
        return dict(FIXTURES[name])
    except KeyError:
        from .config import ConfigError
        raise ConfigError(
            f"unknown fixture {name!r}; available: {', '.join(sorted(FIXTURES))}") from None
