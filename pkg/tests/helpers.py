"""Small builders shared by several test modules."""

from xlradiomap.dataset import DatasetManifest, Instance, enumerate_configs


def mock_manifest(n_scenes: int, config_ids=None) -> DatasetManifest:
    """A manifest with placeholder file paths; nothing is written to disk."""
    if config_ids is None:
        config_ids = [c.config_id for c in enumerate_configs()]
    inst = [
        Instance(f"scene{s:04d}", c, f"scene{s:04d}/{c}.radiomap.bin", f"scene{s:04d}/{c}.beammap.bin",
                 f"scene{s:04d}/heightmap.bin")
        for s in range(n_scenes) for c in config_ids
    ]
    return DatasetManifest(inst)
