import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ovcd import SynthConfig, synth_generate


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    """Small deterministic dataset shared across tests."""
    out = tmp_path_factory.mktemp("synth")
    manifest_path = synth_generate(seed=42, config=SynthConfig(), out_dir=out)
    return manifest_path


@pytest.fixture(scope="session")
def noisy_synth_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth_noisy")
    cfg = SynthConfig(cluster_spread=0.05)
    return synth_generate(seed=43, config=cfg, out_dir=out)
