import os
import shutil

import pytest

TINY_INI = """\
[run]
seed = 5

[simulate]
n_persons = 20
days = 2

[preprocess]
min_eligible_days = 2

[model]
signature_size = 4

[train]
max_epochs = 1
batch_size = 4
window_length = 600
tune_minutes = 720

[baselines]
gbt_rounds = 3
gbt_max_depth = 2

[eval]
downstream_repeats = 1

[sweep]
signature_sizes = 2, 4

[plot]
minutes = 240
"""


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.ini"
    path.write_text(TINY_INI)
    return path


@pytest.fixture(scope="session")
def cli():
    exe = os.environ.get("CVSIG_CLI") or shutil.which("cvsig")
    if not exe:
        pytest.skip("cvsig executable not available")
    return exe
