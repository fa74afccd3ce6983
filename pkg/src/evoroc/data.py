"""Synthetic patient-grouped 6-channel 64x64 dataset, splits, and the EVOD file format.

Each patient gets a smooth per-channel background field; positive slices carry
an additive Gaussian blob (random center, radius 6-12 px, amplitude delta,
random sign) in a random subset of at least 3 channels. Channels are
standardized per channel across the whole dataset, so the class signal is
blob energy (spatial + cross-channel), not an intensity offset.

EVOD layout (all little-endian):
  magic "EVOD", u32 version=1, u32 n_slices, u16 channels=6, u16 height=64,
  u16 width=64, u16 reserved=0; per slice: u32 patient_id, u8 label, 3 zero
  bytes, 6*64*64 f32 pixels (row-major, channel-major); trailing u64 XXH64
  (seed 0) of all preceding bytes.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
import xxhash
from scipy import ndimage

from .errors import FormatError, SplitError
from .rng import RngStream

MAGIC = b"EVOD"
VERSION = 1
CHANNELS, HEIGHT, WIDTH = 6, 64, 64


@dataclass
class SliceRecord:
    pixels: np.ndarray  # (6,64,64) float32
    label: int
    patient_id: int


@dataclass
class Dataset:
    records: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)


@dataclass
class SynthConfig:
    n_patients: int = 60
    slices_min: int = 8
    slices_max: int = 14
    positive_fraction: float = 0.4
    signal_amplitude: float = 0.6
    noise_std: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if self.n_patients < 3:
            raise ValueError("need at least 3 patients")
        if not 0 < self.positive_fraction < 1:
            raise ValueError("positive_fraction must be in (0,1)")
        if self.signal_amplitude < 0 or self.noise_std <= 0:
            raise ValueError("invalid signal/noise configuration")
        if not 1 <= self.slices_min <= self.slices_max:
            raise ValueError("invalid slices-per-patient range")


@dataclass
class SplitSpec:
    train_fraction: float = 0.52
    val_fraction: float = 0.25
    test_fraction: float = 0.23

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError("split fractions must be positive and sum to 1")


def _blob(center_r, center_c, radius, amplitude):
    rr = np.arange(HEIGHT)[:, None] - center_r
    cc = np.arange(WIDTH)[None, :] - center_c
    sigma = radius
    return amplitude * np.exp(-(rr**2 + cc**2) / (2.0 * sigma**2))


def generate_synthetic(config: SynthConfig) -> Dataset:
    root = RngStream(config.master_seed)
    records = []
    for pid in range(config.n_patients):
        prng = root.child("patient", pid)
        # smooth per-patient nuisance field; kept well below the pixel noise so
        # it confounds patient identity without dominating the class signal
        background = ndimage.zoom(
            prng.child("bg").normal(0.0, 0.1 * config.noise_std, (CHANNELS, 8, 8)),
            (1, HEIGHT / 8, WIDTH / 8),
            order=1,
        )
        n_slices = int(prng.child("count").integers(config.slices_min, config.slices_max + 1))
        for s in range(n_slices):
            srng = prng.child("slice", s)
            # mild per-slice channel offsets: a nuisance the classifier must
            # tolerate without drowning the class signal
            jitter = srng.child("jitter").normal(0.0, 0.05 * config.noise_std, (CHANNELS, 1, 1))
            pixels = background + jitter + srng.child("noise").normal(
                0.0, config.noise_std, (CHANNELS, HEIGHT, WIDTH)
            )
            label = int(float(srng.child("label").uniform()) < config.positive_fraction)
            if label:
                brng = srng.child("blob")
                center_r = float(brng.uniform(8, HEIGHT - 8))
                center_c = float(brng.uniform(8, WIDTH - 8))
                radius = float(brng.uniform(6, 12))
                n_ch = int(brng.integers(3, CHANNELS + 1))
                channels = brng.choice(CHANNELS, size=n_ch, replace=False)
                # mostly-bright blobs: the intensity shortcut saturates around
                # AUC 0.8, and separating the dark minority requires contrast
                # (energy) detection on top of it
                sign = 1.0 if float(brng.uniform()) < 0.8 else -1.0
                blob = _blob(center_r, center_c, radius, sign * config.signal_amplitude)
                for ch in channels:
                    pixels[int(ch)] += blob
            records.append(
                SliceRecord(pixels=pixels.astype(np.float32), label=label, patient_id=pid)
            )
    # dataset-level per-channel standardization; per-slice statistics stay
    # informative (a slice-local rescale would cancel the blob's intensity mass)
    stacked = np.stack([r.pixels for r in records])
    mean = stacked.mean(axis=(0, 2, 3), keepdims=True)[0]
    std = stacked.std(axis=(0, 2, 3), keepdims=True)[0]
    for r in records:
        r.pixels = ((r.pixels - mean) / std).astype(np.float32)
    meta = {
        "seed": config.master_seed,
        "n_patients": config.n_patients,
        "positive_fraction": config.positive_fraction,
        "signal_amplitude": config.signal_amplitude,
        "noise_std": config.noise_std,
    }
    return Dataset(records=records, meta=meta)


def _largest_remainder(n, fractions):
    exact = [n * f for f in fractions]
    counts = [int(x) for x in exact]
    remainders = sorted(
        range(len(fractions)), key=lambda i: (exact[i] - counts[i], -i), reverse=True
    )
    for i in range(n - sum(counts)):
        counts[remainders[i]] += 1
    return counts


def split_by_patient(dataset: Dataset, spec: SplitSpec, rng: RngStream):
    """Patient-grouped train/val/test partition (largest-remainder rounding)."""
    pids = sorted({r.patient_id for r in dataset.records})
    if len(pids) < 3:
        raise SplitError("need at least 3 patients to split")
    perm = rng.permutation(len(pids))
    shuffled = [pids[int(i)] for i in perm]
    counts = _largest_remainder(
        len(pids), (spec.train_fraction, spec.val_fraction, spec.test_fraction)
    )
    if any(c == 0 for c in counts):
        raise SplitError("a split received zero patients")
    groups = (
        set(shuffled[: counts[0]]),
        set(shuffled[counts[0] : counts[0] + counts[1]]),
        set(shuffled[counts[0] + counts[1] :]),
    )
    splits = tuple([r for r in dataset.records if r.patient_id in g] for g in groups)
    for name, part in zip(("train", "val", "test"), splits):
        if {r.label for r in part} != {0, 1}:
            raise SplitError(f"{name} split does not contain both classes")
    return splits


def save_dataset(dataset: Dataset, path):
    if not dataset.records:
        raise FormatError("refusing to serialize an empty dataset")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<IIHHHH", VERSION, len(dataset.records), CHANNELS, HEIGHT, WIDTH, 0)
    for r in dataset.records:
        if r.pixels.shape != (CHANNELS, HEIGHT, WIDTH):
            raise FormatError(f"slice shape {r.pixels.shape} != ({CHANNELS},{HEIGHT},{WIDTH})")
        out += struct.pack("<IB3x", r.patient_id, r.label)
        out += np.ascontiguousarray(r.pixels, dtype="<f4").tobytes()
    out += struct.pack("<Q", xxhash.xxh64(bytes(out), seed=0).intdigest())
    with open(path, "wb") as f:
        f.write(out)


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 + 8:
        raise FormatError("truncated dataset file: missing header or checksum")
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, n_slices, channels, height, width, _ = struct.unpack("<IIHHHH", blob[4:20])
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    body, checksum = blob[:-8], struct.unpack("<Q", blob[-8:])[0]
    if xxhash.xxh64(body, seed=0).intdigest() != checksum:
        raise FormatError("checksum mismatch: file corrupted")
    slice_bytes = 8 + channels * height * width * 4
    if len(body) != 20 + n_slices * slice_bytes:
        raise FormatError("truncated dataset file: slice payload size mismatch")
    records = []
    off = 20
    for _ in range(n_slices):
        patient_id, label = struct.unpack("<IB3x", body[off : off + 8])
        if label not in (0, 1):
            raise FormatError(f"invalid label byte {label}")
        pixels = np.frombuffer(
            body, dtype="<f4", count=channels * height * width, offset=off + 8
        ).reshape(channels, height, width)
        records.append(SliceRecord(pixels=pixels.copy(), label=label, patient_id=patient_id))
        off += slice_bytes
    return Dataset(records=records, meta={})
