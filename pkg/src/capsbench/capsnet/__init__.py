from .config import CapsNetConfig
from .layers import (RoutingState, capsnet_loss, capsnet_predict, capsule_lengths, margin_loss,
                     mask_by_target, reconstruction_loss, routing_forward, squash)
from .model import CapsNet, CapsNetOutput, Decoder, PrimaryCapsGrid, capsnet_build, one_hot

__all__ = [
    "CapsNetConfig", "RoutingState", "capsnet_loss", "capsnet_predict", "capsule_lengths",
    "margin_loss", "mask_by_target", "reconstruction_loss", "routing_forward", "squash",
    "CapsNet", "CapsNetOutput", "Decoder", "PrimaryCapsGrid", "capsnet_build", "one_hot",
]
