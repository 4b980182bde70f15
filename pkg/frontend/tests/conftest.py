import subprocess
import sys
from pathlib import Path

import pytest

FRONTEND = Path(__file__).resolve().parents[1]
REPO = FRONTEND.parent
sys.path.insert(0, str(FRONTEND))

# one study run per figure input directory, using the simulator's CLI only
STUDY_RUNS = {
    "fig1b": "fig1b_band.json",
    "fig2a": "fig2a_map_identical.json",
    "fig2b": "fig2b_map_orthogonal.json",
    "fig3a": "fig3a_dynamics_orthogonal.json",
    "fig3b": "fig3b_q2map_orthogonal.json",
    "fig3c": "fig3c_dynamics_identical.json",
    "fig3d": "fig3d_q2map_identical.json",
    "fig4a_a02": "fig4a_distance_orthogonal_a02.json",
    "fig4a_a015": "fig4a_distance_orthogonal_a015.json",
    "fig4a_a01": "fig4a_distance_orthogonal_a01.json",
    "fig4b": "fig4b_spacing.json",
    "fig4c": "fig4c_reach.json",
    "figS1_a02": "figS1_distance_identical_a02.json",
    "figS1_a015": "figS1_distance_identical_a015.json",
    "figS3_identical": "figS3_sizes_identical.json",
    "figS3_orthogonal": "figS3_sizes_orthogonal.json",
}


@pytest.fixture(scope="session")
def fresh_outputs(tmp_path_factory) -> Path:
    """Fresh CLI outputs for every figure, produced through the CLI itself."""
    root = tmp_path_factory.mktemp("study_outputs")
    for out_name, config_name in STUDY_RUNS.items():
        config = REPO / "configs" / config_name
        study = __import__("json").loads(config.read_text())["study"]
        result = subprocess.run(
            [
                "array-emitters",
                study,
                "--config",
                str(config),
                "--out",
                str(root / out_name),
            ],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, (
            f"{config_name} failed ({result.returncode}):\n{result.stderr}"
        )
    return root
