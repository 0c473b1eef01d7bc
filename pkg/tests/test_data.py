from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capsbench.data import (TABLE, CifarFormatError, CifarRecord, DatasetNotFound, EqualizePolicy,
                            PGMMagicError, PGMMaxvalError, PGMTruncatedError, Sample, build_pipeline,
                            decode_cifar100, decode_pgm, encode_cifar100, encode_pgm, histogram_entropy,
                            histogram_equalize, kfold_split, load_cifar100_binary, load_folder,
                            load_pgm, min_max_normalize, preprocess, resize_bilinear,
                            save_cifar100_binary, save_pgm, split_dataset, synth_shapes, synth_split,
                            to_grayscale, validate_samples, write_folder)

from oracles import LUMA, PREPROCESS_TABLE

# ---------------------------------------------------------------- PGM

def test_pgm_p5_example():
    raw = b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64])
    np.testing.assert_allclose(decode_pgm(raw), [[0, 1], [128 / 255, 64 / 255]], rtol=0, atol=1e-15)
    np.testing.assert_allclose(decode_pgm(raw), [[0, 1], [0.50196, 0.25098]], atol=5e-6)


def test_pgm_truncated_payload():
    with pytest.raises(PGMTruncatedError, match="unexpected EOF"):
        decode_pgm(b"P5\n2 2\n255\n" + bytes([0, 255, 128]))
    with pytest.raises(PGMTruncatedError, match="unexpected EOF"):
        decode_pgm(b"P5\n2 2\n")


def test_pgm_bad_magic_and_maxval():
    with pytest.raises(PGMMagicError):
        decode_pgm(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(PGMMaxvalError):
        decode_pgm(b"P5\n1 1\n70000\n\x00\x00")


def test_pgm_header_comments_and_ascii():
    raw = b"P2\n# made by hand\n3 1 # width height\n10\n0 5\n10\n"
    np.testing.assert_allclose(decode_pgm(raw), [[0.0, 0.5, 1.0]])


def test_pgm_16bit_big_endian():
    raw = b"P5\n2 1\n65535\n" + bytes([0xFF, 0xFF, 0x00, 0x01])
    np.testing.assert_allclose(decode_pgm(raw), [[1.0, 1 / 65535]])


def test_pgm_p2_and_p5_load_identically():
    img = np.random.default_rng(0).integers(0, 256, (7, 5)) / 255.0
    np.testing.assert_array_equal(decode_pgm(encode_pgm(img)), decode_pgm(encode_pgm(img, ascii=True)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.sampled_from([1, 15, 255, 1000, 65535]),
       st.integers(0, 2**31))
def test_pgm_roundtrip_exact(h, w, maxval, seed):
    img = np.random.default_rng(seed).integers(0, maxval + 1, (h, w)) / maxval
    raw = encode_pgm(img, maxval)
    once = decode_pgm(raw)
    np.testing.assert_array_equal(once, img)
    assert encode_pgm(once, maxval) == raw


def test_pgm_file_roundtrip(tmp_path):
    img = np.arange(12).reshape(3, 4) / 11.0
    save_pgm(tmp_path / "a.pgm", img, maxval=11)
    np.testing.assert_array_equal(load_pgm(tmp_path / "a.pgm"), img)


# ---------------------------------------------------------------- CIFAR

def cifar_bytes(n, seed=0):
    rng = np.random.default_rng(seed)
    out = bytearray()
    for i in range(n):
        out += bytes([i % 20, (7 * i) % 100])
        out += rng.integers(0, 256, 3072, dtype=np.uint8).tobytes()
    return bytes(out)


def test_cifar_record_layout_by_hand():
    raw = bytearray([3, 42]) + bytes(3072)
    raw[2] = 200                 # red plane, pixel (0, 0)
    raw[2 + 1024 + 33] = 100     # green plane, pixel (1, 1)
    raw[2 + 2048 + 1023] = 50    # blue plane, pixel (31, 31)
    (rec,) = decode_cifar100(bytes(raw))
    assert (rec.coarse, rec.fine) == (3, 42)
    assert rec.image[0, 0, 0] == 200 and rec.image[1, 1, 1] == 100 and rec.image[31, 31, 2] == 50
    assert int(rec.image.sum()) == 350
    assert encode_cifar100([rec]) == bytes(raw)


def test_cifar_ten_records_and_label_range(tmp_path):
    (tmp_path / "data.bin").write_bytes(cifar_bytes(10))
    records = load_cifar100_binary(tmp_path / "data.bin")
    assert len(records) == 10
    assert all(0 <= r.fine < 100 for r in records)
    assert all(r.image.shape == (32, 32, 3) and r.image.dtype == np.uint8 for r in records)


def test_cifar_roundtrip_bytes(tmp_path):
    raw = cifar_bytes(3, seed=4)
    save_cifar100_binary(tmp_path / "x.bin", decode_cifar100(raw))
    assert (tmp_path / "x.bin").read_bytes() == raw


def test_cifar_errors():
    with pytest.raises(CifarFormatError):
        decode_cifar100(bytes(3073))
    with pytest.raises(CifarFormatError):
        encode_cifar100([CifarRecord(np.zeros((32, 32, 3)), 1, 1)])


# ---------------------------------------------------------------- transforms

def test_grayscale_examples():
    assert to_grayscale(np.ones((1, 1, 3)))[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert to_grayscale(np.array([[[1.0, 0, 0]]]))[0, 0] == LUMA[0]
    v = np.random.default_rng(0).uniform(0, 1, (4, 4))
    np.testing.assert_allclose(to_grayscale(np.stack([v, v, v], -1)), v, atol=1e-15)
    with pytest.raises(ValueError):
        to_grayscale(np.zeros((4, 4)))


def test_min_max_examples():
    np.testing.assert_array_equal(min_max_normalize(np.array([50.0, 100.0, 150.0])), [0, 0.5, 1])
    img = np.array([[0.0, 0.2], [1.0, 0.7]])
    np.testing.assert_array_equal(min_max_normalize(img), img)
    np.testing.assert_array_equal(min_max_normalize(np.full((3, 3), 7.0)), 0.0)


def test_equalize_uniform_image_moves_at_most_one_bin():
    img = ((np.arange(256) + 0.5) / 256).reshape(16, 16)
    assert np.max(np.abs(histogram_equalize(img) - img)) <= 1 / 256 + 1e-15


def test_equalize_two_valued_image_maps_to_extremes():
    img = np.array([0.3, 0.31] * 50).reshape(10, 10)
    out = histogram_equalize(img)
    np.testing.assert_array_equal(np.unique(out), [0.0, 1.0])
    np.testing.assert_array_equal(out[img == 0.3], 0.0)


def test_equalize_constant_image_unchanged():
    np.testing.assert_array_equal(histogram_equalize(np.full((3, 3), 0.4)), 0.4)


def test_entropy_values():
    assert histogram_entropy(np.full((4, 4), 0.5)) == 0.0
    assert histogram_entropy((np.arange(256) + 0.5) / 256) == pytest.approx(8.0)


@pytest.mark.parametrize("src,dst", [((192, 168), (96, 84)), ((200, 200), (72, 55))])
def test_resize_table_sizes(src, dst):
    assert resize_bilinear(np.zeros(src), *dst).shape == dst


def test_resize_same_size_is_identity():
    img = np.random.default_rng(0).uniform(0, 1, (9, 7))
    np.testing.assert_array_equal(resize_bilinear(img, 9, 7), img)


def test_resize_halving_averages_2x2_blocks():
    img = np.random.default_rng(1).uniform(0, 1, (8, 6))
    blocks = img.reshape(4, 2, 3, 2).mean(axis=(1, 3))
    np.testing.assert_allclose(resize_bilinear(img, 4, 3), blocks, atol=1e-15)


def test_resize_rejects_empty_target():
    with pytest.raises(ValueError):
        resize_bilinear(np.zeros((4, 4)), 0, 2)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(TABLE)), st.integers(0, 2**31), st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_every_pipeline_output_in_unit_range(dataset, seed, offset, scale):
    rng = np.random.default_rng(seed)
    shape = {"yale": (30, 24), "mit": (20, 20), "belgiumts": (17, 23, 3), "cifar100": (32, 32, 3)}[dataset]
    out = preprocess(dataset, rng.standard_normal(shape) * scale + offset)
    assert out.min() >= 0 and out.max() <= 1
    assert out.shape == PREPROCESS_TABLE[dataset][1]


@pytest.mark.parametrize("dataset", sorted(PREPROCESS_TABLE))
def test_pipeline_steps_match_table(dataset):
    pipe = build_pipeline(dataset)
    names, size = PREPROCESS_TABLE[dataset]
    assert pipe.step_names() == names
    assert pipe.output_size == size


def test_equalize_policy_modes():
    low_contrast = 0.4 + 0.1 * np.random.default_rng(0).uniform(0, 1, (20, 20))
    wide = np.random.default_rng(1).uniform(0, 1, (64, 64))
    auto = EqualizePolicy()
    assert auto.wants(low_contrast) and not auto.wants(wide)
    assert EqualizePolicy("always").wants(wide) and not EqualizePolicy("never").wants(low_contrast)
    with pytest.raises(ValueError):
        EqualizePolicy("sometimes")


def test_pipeline_trace_lists_applied_steps():
    pipe = build_pipeline("yale", EqualizePolicy("never"))
    trace = []
    pipe(np.random.default_rng(0).uniform(0, 1, (192, 168)), trace)
    assert trace == ["grayscale_check", "min_max_normalize", "resize_96x84"]
    trace = []
    build_pipeline("yale", EqualizePolicy("always"))(np.random.default_rng(0).uniform(0, 1, (192, 168)), trace)
    assert "histogram_equalize" in trace


def test_pipeline_rejects_wrong_colour_and_size():
    with pytest.raises(ValueError):
        preprocess("yale", np.zeros((10, 10, 3)))
    with pytest.raises(ValueError):
        preprocess("cifar100", np.zeros((30, 32, 3)))
    with pytest.raises(ValueError):
        build_pipeline("mnist")


# ---------------------------------------------------------------- splits

def make_samples(n, n_classes=1):
    return [Sample(np.zeros((2, 2)), i % n_classes, str(i)) for i in range(n)]


def test_split_70_15_15():
    assert split_dataset(make_samples(100), seed=0, stratified=False).sizes() == (70, 15, 15)
    assert split_dataset(make_samples(100), seed=0).sizes() == (70, 15, 15)


def test_split_is_seeded():
    a = split_dataset(make_samples(50, 5), seed=3)
    b = split_dataset(make_samples(50, 5), seed=3)
    c = split_dataset(make_samples(50, 5), seed=4)
    ids = lambda s: [x.source_id for x in s.train + s.validation + s.test]
    assert ids(a) == ids(b) and ids(a) != ids(c)


def test_stratified_keeps_all_38_classes():
    split = split_dataset(make_samples(38 * 7, 38), seed=1)
    for part in (split.train, split.validation, split.test):
        assert set(s.label for s in part) == set(range(38))


@settings(max_examples=80, deadline=None)
@given(st.integers(3, 1000), st.integers(1, 12), st.booleans(), st.integers(0, 2**31))
def test_split_partitions(n, n_classes, stratified, seed):
    split = split_dataset(make_samples(n, n_classes), seed, stratified)
    ids = [s.source_id for s in split.train + split.validation + split.test]
    assert sorted(ids) == sorted(str(i) for i in range(n))
    if not stratified:
        assert split.sizes()[0] == round(0.7 * n)


def test_split_rejects_bad_fractions():
    with pytest.raises(ValueError):
        split_dataset(make_samples(10), fractions=(0.5, 0.5, 0.5))


def test_kfold_five_on_hundred():
    folds = kfold_split(make_samples(100), K=5, seed=0)
    assert len(folds) == 5
    vals = [set(s.source_id for s in v) for _, v in folds]
    assert all(len(v) == 20 for v in vals)
    assert set().union(*vals) == {str(i) for i in range(100)}
    assert sum(len(v) for v in vals) == 100
    for train, val in folds:
        assert not set(s.source_id for s in train) & set(s.source_id for s in val)
        assert len(train) == 80


def test_kfold_twenty_repeats():
    folds = kfold_split(make_samples(50), K=5, repeats=20, seed=1)
    assert len(folds) == 100
    for r in range(20):
        union = set()
        for _, val in folds[5 * r:5 * r + 5]:
            union |= {s.source_id for s in val}
        assert len(union) == 50


def test_kfold_errors():
    with pytest.raises(ValueError):
        kfold_split(make_samples(10), K=1)
    with pytest.raises(ValueError):
        kfold_split(make_samples(3), K=5)


def test_validate_samples():
    validate_samples(make_samples(4, 2), n_classes=2)
    with pytest.raises(ValueError):
        validate_samples([Sample(np.full((2, 2), 1.5), 0)])
    with pytest.raises(ValueError):
        validate_samples(make_samples(4, 3), n_classes=2)


# ---------------------------------------------------------------- synthetic shapes

def test_synth_zero_jitter_images_identical_within_class():
    samples = synth_shapes(3, size=20, seed=0, jitter=0.0)
    by_class = {}
    for s in samples:
        by_class.setdefault(s.label, []).append(s.image)
    assert len(by_class) == 4
    for imgs in by_class.values():
        for img in imgs[1:]:
            np.testing.assert_array_equal(img, imgs[0])
    assert len({by_class[k][0].tobytes() for k in by_class}) == 4


def test_synth_seeded_and_jittered():
    a = synth_shapes(2, size=16, seed=5, jitter=0.2)
    b = synth_shapes(2, size=16, seed=5, jitter=0.2)
    c = synth_shapes(2, size=16, seed=6, jitter=0.2)
    assert all(np.array_equal(x.image, y.image) for x, y in zip(a, b))
    assert not all(np.array_equal(x.image, y.image) for x, y in zip(a, c))
    assert all(s.image.min() >= 0 and s.image.max() <= 1 for s in a)


def test_synth_class_subset_and_unknown_shape():
    samples = synth_shapes(2, classes=("cross", "ellipse"), size=16)
    assert Counter(s.label for s in samples) == {0: 2, 1: 2}
    with pytest.raises(ValueError):
        synth_shapes(1, classes=("hexagon",), size=16)


def test_synth_split_sizes():
    split = synth_split(20, 8, 8, size=16, seed=0, jitter=0.1)
    assert split.sizes() == (20, 8, 8)
    assert Counter(s.label for s in split.train) == {k: 5 for k in range(4)}


# ---------------------------------------------------------------- folders

def test_folder_roundtrip(tmp_path):
    samples = synth_shapes(2, size=12, seed=0, jitter=0.1)
    write_folder(samples, tmp_path / "ds")
    loaded = load_folder(tmp_path / "ds")
    assert [s.label for s in loaded] == [s.label for s in samples]
    for a, b in zip(loaded, samples):
        np.testing.assert_allclose(a.image, b.image, atol=0.5 / 255 + 1e-12)


def test_folder_class_directories_without_index(tmp_path):
    for label in (0, 2):
        (tmp_path / str(label)).mkdir()
        save_pgm(tmp_path / str(label) / "a.pgm", np.full((3, 3), label / 2))
    loaded = load_folder(tmp_path)
    assert [s.label for s in loaded] == [0, 2]


def test_folder_missing(tmp_path):
    with pytest.raises(DatasetNotFound):
        load_folder(tmp_path / "nope")
    with pytest.raises(DatasetNotFound):
        load_folder(tmp_path)
