from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields


@dataclass
class CapsNetConfig:
    """Architecture and loss hyperparameters of a capsule network.

    ``F`` is the number of primary-capsule channels, ``D1``/``D2`` the vector
    lengths of primary and routing capsules and ``C`` the number of classes.
    """

    x1: int = 28
    x2: int = 28
    C: int = 10
    F: int = 8
    D1: int = 8
    D2: int = 8
    stem_maps: int = 256
    stem_kernel: int = 9
    primary_kernel: int = 9
    primary_stride: int = 2
    routing_iterations: int = 3
    m_plus: float = 0.9
    m_minus: float = 0.1
    lam: float = 0.5
    recon_weight: float | None = None
    decoder_hidden: tuple[int, int] = field(default=(512, 1024))
    route_stop_gradient: bool = False

    def __post_init__(self):
        if self.recon_weight is None:
            self.recon_weight = 0.0005 * (self.x1 * self.x2) / 784
        self.decoder_hidden = tuple(int(h) for h in self.decoder_hidden)

    @property
    def stem_extent(self) -> tuple[int, int]:
        return self.x1 - self.stem_kernel + 1, self.x2 - self.stem_kernel + 1

    @property
    def grid(self) -> tuple[int, int]:
        """Primary capsule grid extents (G1, G2)."""
        h, w = self.stem_extent
        k, s = self.primary_kernel, self.primary_stride
        return (h - k) // s + 1, (w - k) // s + 1

    @property
    def n_primary(self) -> int:
        g1, g2 = self.grid
        return g1 * g2 * self.F

    def validate(self) -> "CapsNetConfig":
        for name in ("C", "F", "D1", "D2", "stem_maps", "stem_kernel", "primary_kernel",
                     "primary_stride", "routing_iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 < self.m_minus < self.m_plus < 1:
            raise ValueError(f"need 0 < m_minus < m_plus < 1, got {self.m_minus}, {self.m_plus}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.recon_weight < 0:
            raise ValueError("recon_weight must be >= 0")
        h, w = self.stem_extent
        g1, g2 = self.grid
        if h < self.primary_kernel or w < self.primary_kernel or g1 < 1 or g2 < 1:
            raise ValueError(f"input too small: {self.x1}x{self.x2} gives an empty primary capsule grid")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CapsNetConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown CapsNetConfig keys: {sorted(unknown)}")
        return cls(**d)
