from .fisherfaces import FisherfaceModel, FisherfacesError, fisher_fit, fisher_predict
from .lenet import LeNet, lenet_build, lenet_forward
from .resnet import ResidualBlock, TinyResNet, residual_block_forward, tiny_resnet_build

__all__ = [
    "FisherfaceModel", "FisherfacesError", "fisher_fit", "fisher_predict", "LeNet",
    "lenet_build", "lenet_forward", "ResidualBlock", "TinyResNet", "residual_block_forward",
    "tiny_resnet_build",
]
