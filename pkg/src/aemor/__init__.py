"""Non-intrusive reduced-order modelling with autoencoders and POD.

Autoencoders compress snapshot fields into a small latent space, a regressor
maps parameters to that latent space, and the decoder turns predicted latents
back into full fields. POD with Galerkin projection is included as the linear
baseline.
"""

from .architectures import (Autoencoder, ForceAugmentedModel, LatentRegressor, MultiFieldModel, StaggeredForceNet,
                            train_autoencoder, train_force_augmented, train_multifield, train_regressor,
                            train_staggered)
from .bundle import SurrogateBundle
from .data import (Field, ForceBlock, SnapshotSet, generate_ellipse_morph, generate_synthetic, param_map_plate,
                   param_map_thermo, param_map_unit_cell, read_snapshots, subsample_time, write_snapshots)
from .errors import (ChecksumError, ConfigError, ContractError, DataError, FileFormatError, MagicError, MorError,
                     NumericalError, StageOrderError, StructureError, TrainingError, TruncatedError)
from .neural import Activation, MLPParams, Network, NetworkSpec
from .pod import PODBasis, builtin_fom, pod_basis, reduce_and_solve
from .training import LossTrace, TrainConfig

__version__ = "0.1.0"
