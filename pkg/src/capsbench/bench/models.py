"""Building, predicting with and persisting every supported model kind."""
from __future__ import annotations

import numpy as np

from .. import checkpoint
from ..baselines import FisherfaceModel, LeNet, TinyResNet
from ..capsnet import CapsNet, CapsNetConfig
from .config import ExperimentConfig, parse_bool, parse_int_list

_CAPS_CASTS = {"F": int, "D1": int, "D2": int, "stem_maps": int, "stem_kernel": int,
               "primary_kernel": int, "primary_stride": int, "routing_iterations": int,
               "m_plus": float, "m_minus": float, "lam": float, "recon_weight": float,
               "decoder_hidden": parse_int_list, "route_stop_gradient": parse_bool}


def capsnet_config(cfg: ExperimentConfig, input_shape, n_classes: int) -> CapsNetConfig:
    kw = {k: _CAPS_CASTS[k](v) for k, v in cfg.section("capsnet").items()}
    return CapsNetConfig(x1=input_shape[0], x2=input_shape[1], C=n_classes, **kw)


def lenet_kwargs(cfg: ExperimentConfig) -> dict:
    sec = cfg.section("lenet")
    kw = {}
    if "kernel" in sec:
        kw["kernel"] = int(sec["kernel"])
    if "channels" in sec:
        kw["channels"] = parse_int_list(sec["channels"])
    if "hidden" in sec:
        kw["hidden"] = parse_int_list(sec["hidden"])
    for key in ("pool", "activation"):
        if key in sec:
            kw[key] = sec[key]
    return kw


def build_model(cfg: ExperimentConfig, input_shape, n_classes: int, dtype=None):
    """Neural model for ``cfg``; Fisherfaces models come from fitting instead."""
    dtype = np.dtype(dtype or cfg.dtype)
    if cfg.model == "capsnet":
        return CapsNet(capsnet_config(cfg, input_shape, n_classes), seed=cfg.seed, dtype=dtype)
    if cfg.model == "lenet":
        return LeNet(tuple(input_shape), n_classes, seed=cfg.seed, dtype=dtype, **lenet_kwargs(cfg))
    if cfg.model == "tiny_resnet":
        sec = cfg.section("tiny_resnet")
        return TinyResNet(int(sec.get("blocks", 4)), n_classes, width=int(sec.get("width", 16)),
                          input_shape=tuple(input_shape), seed=cfg.seed, dtype=dtype)
    raise ValueError(f"{cfg.model} is not a gradient-trained model")


def predictor(model):
    if isinstance(model, FisherfaceModel):
        from ..baselines import fisher_predict
        return lambda images: fisher_predict(model, images)
    return model.predict


def save_model(path, model, cfg: ExperimentConfig, input_shape, n_classes: int) -> None:
    meta = dict(cfg.to_items())
    meta["input_height"], meta["input_width"] = input_shape
    meta["n_classes"] = n_classes
    if isinstance(model, FisherfaceModel):
        arrays = model.to_arrays()
    else:
        arrays = model.state_arrays()
    checkpoint.save(path, meta, arrays)


def load_model(path):
    """Returns ``(model, config, input_shape, n_classes)``."""
    from .config import config_from_items

    meta, arrays = checkpoint.load(path)
    input_shape = (int(meta.pop("input_height")), int(meta.pop("input_width")))
    n_classes = int(meta.pop("n_classes"))
    cfg = config_from_items(meta)
    if cfg.model == "fisherfaces":
        return FisherfaceModel.from_arrays(arrays, n_classes), cfg, input_shape, n_classes
    model = build_model(cfg, input_shape, n_classes)
    model.load_state_arrays({k: v.astype(model.dtype) for k, v in arrays.items()})
    model.eval()
    return model, cfg, input_shape, n_classes
