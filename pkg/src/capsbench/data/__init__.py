from .cifar import (CifarFormatError, CifarRecord, decode_cifar100, encode_cifar100,
                    load_cifar100_binary, save_cifar100_binary)
from .dataset import DatasetSplit, Sample, kfold_split, split_dataset, stack, validate_samples
from .folder import DatasetNotFound, load_folder, write_folder
from .pgm import (PGMError, PGMMagicError, PGMMaxvalError, PGMTruncatedError, decode_pgm,
                  encode_pgm, load_pgm, save_pgm)
from .preprocess import TABLE, EqualizePolicy, Pipeline, build_pipeline, preprocess
from .synth import SHAPES, render_shape, synth_shapes, synth_split
from .transforms import (histogram_entropy, histogram_equalize, min_max_normalize,
                         resize_bilinear, to_grayscale)

__all__ = [
    "CifarFormatError", "CifarRecord", "decode_cifar100", "encode_cifar100",
    "load_cifar100_binary", "save_cifar100_binary", "DatasetSplit", "Sample", "kfold_split",
    "split_dataset", "stack", "validate_samples", "DatasetNotFound", "load_folder",
    "write_folder", "PGMError", "PGMMagicError", "PGMMaxvalError", "PGMTruncatedError",
    "decode_pgm", "encode_pgm", "load_pgm", "save_pgm", "TABLE", "EqualizePolicy", "Pipeline",
    "build_pipeline", "preprocess", "SHAPES", "render_shape", "synth_shapes", "synth_split",
    "histogram_entropy", "histogram_equalize", "min_max_normalize", "resize_bilinear",
    "to_grayscale",
]
