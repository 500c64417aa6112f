"""Neural Friendly Training with classic, friendly and easy-first baselines.

The auxiliary network learns to simplify training inputs for the
classifier; its influence fades on a fixed schedule until it is dropped.
"""

__version__ = "0.1.0"

from .autodiff import Adam, ParamStore, Tape, Tensor, backward, ops  # noqa: E402
from .data import Dataset, gen_blobs, gen_two_moons, inject_label_noise, load_amat  # noqa: E402
from .engines import (  # noqa: E402
    EpochRecord, RunConfig, TrainResult, ct_loss, nft_loss, train, train_ct, train_eef,
    train_ft, train_nft,
)
from .kernels import BACKEND  # noqa: E402
from .models import (  # noqa: E402
    AuxNetSpec, ClassifierSpec, build_auxiliary, build_classifier, simplify,
)
from .schedule import SchedulePlan, eta_at, phase_of  # noqa: E402
