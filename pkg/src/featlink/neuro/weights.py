"""Parameter manifest, seeded initialization and bundle I/O."""

from collections import OrderedDict
from dataclasses import asdict, dataclass
from types import MappingProxyType

import numpy as np

from ..rng import keyed_rng
from . import store

BUNDLE_MAGIC = "FEATLINK-WEIGHTS"

WIDTH = 256          # pyramid / SoM-feature channel width
SE_RATIO = 16
SNR_HIDDEN = 32


@dataclass(frozen=True)
class ArchConfig:
    """Everything that determines the set of parameter shapes."""

    n_antennas: int = 2
    depth: int = 6
    feature_channels: int = 48

    def __post_init__(self):
        if self.n_antennas < 1 or WIDTH % self.n_antennas:
            raise ValueError(f"{WIDTH} is not divisible by n_antennas={self.n_antennas}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.feature_channels < 1:
            raise ValueError("feature_channels must be >= 1")

    @property
    def snr_embed_dim(self):
        return WIDTH // self.n_antennas


def _conv(prefix, c_out, c_in, k):
    return [(f"{prefix}.weight", (c_out, c_in, k, k)), (f"{prefix}.bias", (c_out,))]


def _fc(prefix, c_out, c_in):
    return [(f"{prefix}.weight", (c_out, c_in)), (f"{prefix}.bias", (c_out,))]


def _bn(prefix, c):
    return [(f"{prefix}.{s}", (c,)) for s in ("mean", "var", "scale", "shift")]


def _se(prefix, c):
    return _fc(f"{prefix}.fc1", c // SE_RATIO, c) + _fc(f"{prefix}.fc2", c, c // SE_RATIO)


def _channel_aware(prefix, arch):
    entries = []
    for b in range(arch.depth):
        p = f"{prefix}.{b}"
        entries += _conv(f"{p}.conv1", WIDTH, WIDTH, 1) + _bn(f"{p}.bn1", WIDTH)
        entries += _conv(f"{p}.conv2", WIDTH, WIDTH, 3) + _bn(f"{p}.bn2", WIDTH)
        entries += _fc(f"{p}.snr.fc1", SNR_HIDDEN, 1)
        entries += _fc(f"{p}.snr.fc2", arch.snr_embed_dim, SNR_HIDDEN)
        entries += _fc(f"{p}.att.fc1", WIDTH, 2 * WIDTH)
        entries += _fc(f"{p}.att.fc2", WIDTH, WIDTH)
    return entries


def manifest(arch):
    """Ordered ``name -> shape`` for every parameter of the architecture."""
    w2 = 2 * WIDTH
    entries = []
    for i in (1, 2):
        entries += _conv(f"hff.down{i}", WIDTH, WIDTH, 2)
    for i in (1, 2, 3):
        p = f"hff.fuse{i}"
        entries += _conv(f"{p}.conv3", w2, w2, 3) + _bn(f"{p}.bn", w2)
        entries += _se(f"{p}.se", w2) + _conv(f"{p}.conv1", WIDTH, w2, 1)
    for i in (1, 2, 3):
        p = f"hfs.split{i}"
        entries += _conv(f"{p}.conv1", w2, WIDTH, 1) + _se(f"{p}.se", w2)
        entries += _bn(f"{p}.bn", w2) + _conv(f"{p}.conv3", w2, w2, 3)
    entries += _channel_aware("mce", arch)
    entries += _channel_aware("mcd", arch)
    entries += _fc("fc.compress", arch.feature_channels, WIDTH)
    entries += _fc("fc.decompress", WIDTH, arch.feature_channels)
    return OrderedDict(entries)


class WeightBundle:
    """Immutable named-tensor container checked against an architecture."""

    def __init__(self, arch, tensors):
        expected = manifest(arch)
        missing = [k for k in expected if k not in tensors]
        extra = [k for k in tensors if k not in expected]
        if missing or extra:
            raise ValueError(
                f"weight names do not match architecture: missing={missing[:5]} "
                f"(+{max(0, len(missing) - 5)}), unexpected={extra[:5]}")
        ordered = OrderedDict()
        for name, shape in expected.items():
            t = np.asarray(tensors[name], dtype=np.float32)
            if t.shape != shape:
                raise ValueError(f"weight {name!r} has shape {t.shape}, expected {shape}")
            t = t.copy()
            t.setflags(write=False)
            ordered[name] = t
        self.arch = arch
        self._tensors = MappingProxyType(ordered)

    def __getitem__(self, name):
        return self._tensors[name]

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    @property
    def tensors(self):
        return self._tensors

    def checksum(self):
        return store.checksum_of(self._tensors)

    def replace(self, mapping):
        """Copy with the tensors in ``mapping`` swapped in."""
        new = dict(self._tensors)
        new.update(mapping)
        return WeightBundle(self.arch, new)

    def save(self, stem):
        return store.save_container(stem, self._tensors, BUNDLE_MAGIC,
                                    meta={"arch": asdict(self.arch)})

    @classmethod
    def load(cls, stem, arch=None):
        tensors, meta = store.load_container(stem, BUNDLE_MAGIC)
        stored = ArchConfig(**meta["arch"]) if "arch" in meta else None
        if arch is None:
            if stored is None:
                raise store.ContainerError("bundle has no architecture metadata")
            arch = stored
        return cls(arch, tensors)


def _fan_in(name, shape):
    if len(shape) == 4:
        return shape[1] * shape[2] * shape[3]
    return shape[1]


def init_weights(seed, arch, zero_bias=True):
    """Seeded fan-in uniform initialization.

    Kernels and FC matrices are drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in))
    in manifest order from a single keyed stream. BN statistics start at the
    identity transform; biases are zero unless ``zero_bias`` is False, in
    which case they use U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    """
    rng = keyed_rng(seed, 0, "weights")
    shapes = manifest(arch)
    fan = {}
    tensors = OrderedDict()
    for name, shape in shapes.items():
        leaf = name.rsplit(".", 1)[1]
        if leaf == "weight":
            fan[name.rsplit(".", 1)[0]] = _fan_in(name, shape)
            bound = np.sqrt(6.0 / fan[name.rsplit(".", 1)[0]])
            tensors[name] = rng.uniform(-bound, bound, shape).astype(np.float32)
        elif leaf == "bias":
            if zero_bias:
                tensors[name] = np.zeros(shape, np.float32)
            else:
                bound = 1.0 / np.sqrt(fan[name.rsplit(".", 1)[0]])
                tensors[name] = rng.uniform(-bound, bound, shape).astype(np.float32)
        elif leaf in ("var", "scale"):
            tensors[name] = np.ones(shape, np.float32)
        else:
            tensors[name] = np.zeros(shape, np.float32)
    return WeightBundle(arch, tensors)
