"""3-D convolutional autoencoder with manual backpropagation."""

from .network import (Architecture, LayerSpec, Network, conv, deconv, dense, pool,
                      reconstruction_loss, reconstruction_seed)
from .checkpoint import load_checkpoint, save_checkpoint
from . import architectures, layers

__all__ = ["Architecture", "LayerSpec", "Network", "conv", "deconv", "dense", "pool",
           "reconstruction_loss", "reconstruction_seed", "load_checkpoint",
           "save_checkpoint", "architectures", "layers"]
