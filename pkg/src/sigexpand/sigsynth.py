"""Synthetic modulation dataset generator.

Produces labeled IQ samples for eight digital schemes: Gray-mapped linear
constellations (BPSK/QPSK/PSK8/PAM4/QAM16/QAM64) shaped with a root-raised
cosine filter, plus two constant-envelope FSK schemes (CPFSK h=0.5, GFSK
BT=0.35). Every waveform is renormalized to unit average power before
circularly-symmetric AWGN is injected, so the nominal SNR is exact by
construction.

Determinism: each record's RNG is derived from
SeedSequence(spec.seed, spawn_key=(class_index, snr_index, record_index)),
so generation is a pure function of the GenSpec and is order-independent
across (class, SNR) cells.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataio import SignalDataset

CPFSK_MOD_INDEX = 0.5
GFSK_MOD_INDEX = 0.5
GFSK_BT = 0.35
RRC_SPAN_SYMBOLS = 8
GFSK_KERNEL_SPAN_SYMBOLS = 4
# symbols drawn per record beyond what signal_len strictly needs, to cover
# filter transients for every scheme
EXTRA_SYMBOLS = 8


class ModulationScheme(str, enum.Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"
    PSK8 = "PSK8"
    PAM4 = "PAM4"
    QAM16 = "QAM16"
    QAM64 = "QAM64"
    CPFSK = "CPFSK"
    GFSK = "GFSK"

    @property
    def is_linear(self) -> bool:
        return self not in (ModulationScheme.CPFSK, ModulationScheme.GFSK)

    @property
    def order(self) -> int:
        return _ORDER[self]


DEFAULT_SCHEMES = tuple(ModulationScheme)

_ORDER = {
    ModulationScheme.BPSK: 2,
    ModulationScheme.QPSK: 4,
    ModulationScheme.PSK8: 8,
    ModulationScheme.PAM4: 4,
    ModulationScheme.QAM16: 16,
    ModulationScheme.QAM64: 64,
    ModulationScheme.CPFSK: 2,
    ModulationScheme.GFSK: 2,
}


def _gray_positions(bits: int) -> np.ndarray:
    """table[symbol] = constellation position, using binary-reflected Gray code."""
    m = 1 << bits
    table = np.empty(m, dtype=np.int64)
    for pos in range(m):
        table[pos ^ (pos >> 1)] = pos
    return table


def _pam_levels(m: int) -> np.ndarray:
    return np.arange(-(m - 1), m, 2, dtype=np.float64)


def constellation(scheme: ModulationScheme) -> np.ndarray:
    """Gray-mapped unit-average-energy constellation, indexed by symbol value.

    CPFSK/GFSK get antipodal +/-1 frequency symbols so the mapping is total.
    """
    scheme = ModulationScheme(scheme)
    if scheme in (ModulationScheme.BPSK, ModulationScheme.CPFSK, ModulationScheme.GFSK):
        return np.array([1.0 + 0j, -1.0 + 0j])
    if scheme == ModulationScheme.QPSK:
        pos = _gray_positions(2)
        angles = np.pi / 4 + pos * np.pi / 2
        return np.exp(1j * angles)
    if scheme == ModulationScheme.PSK8:
        pos = _gray_positions(3)
        return np.exp(2j * np.pi * pos / 8)
    if scheme == ModulationScheme.PAM4:
        levels = _pam_levels(4)[_gray_positions(2)]
        return (levels / np.sqrt(np.mean(levels**2))).astype(complex)
    if scheme in (ModulationScheme.QAM16, ModulationScheme.QAM64):
        side_bits = 2 if scheme == ModulationScheme.QAM16 else 3
        side = 1 << side_bits
        levels = _pam_levels(side)[_gray_positions(side_bits)]
        syms = np.arange(side * side)
        points = levels[syms >> side_bits] + 1j * levels[syms & (side - 1)]
        return points / np.sqrt(np.mean(np.abs(points) ** 2))
    raise ValueError(f"unknown scheme {scheme}")


def map_symbols(scheme: ModulationScheme, symbol_indices) -> np.ndarray:
    """Map symbol values to Gray-coded constellation points."""
    points = constellation(scheme)
    idx = np.asarray(symbol_indices, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= len(points)):
        raise ValueError(
            f"symbol index out of range for {ModulationScheme(scheme).value} "
            f"(order {len(points)})")
    return points[idx]


@dataclass(frozen=True)
class GenSpec:
    """Full recipe for one synthetic dataset; generation is a pure function of it."""

    schemes: tuple = DEFAULT_SCHEMES
    snr_min_db: int = -20
    snr_max_db: int = 18
    snr_step_db: int = 2
    per_class_per_snr: int = 1000
    signal_len: int = 128
    samples_per_symbol: int = 8
    rrc_rolloff: float = 0.35
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "schemes",
                           tuple(ModulationScheme(s) for s in self.schemes))
        if not self.schemes:
            raise ValueError("at least one scheme required")
        if self.snr_min_db > self.snr_max_db:
            raise ValueError("snr_min_db must be <= snr_max_db")
        if self.snr_step_db <= 0:
            raise ValueError("snr_step_db must be positive")
        if (self.snr_max_db - self.snr_min_db) % self.snr_step_db != 0:
            raise ValueError("SNR span must be divisible by snr_step_db")
        if self.per_class_per_snr < 1:
            raise ValueError("per_class_per_snr must be positive")
        if self.signal_len < 1 or self.samples_per_symbol < 1:
            raise ValueError("signal_len and samples_per_symbol must be positive")
        if self.signal_len % self.samples_per_symbol != 0:
            raise ValueError("signal_len must be divisible by samples_per_symbol")
        if not 0 < self.rrc_rolloff <= 1:
            raise ValueError("rrc_rolloff must be in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def snr_levels(self) -> list[int]:
        return list(range(self.snr_min_db, self.snr_max_db + 1, self.snr_step_db))

    @property
    def num_classes(self) -> int:
        return len(self.schemes)

    def class_names(self) -> list[str]:
        return [s.value for s in self.schemes]


def rrc_taps(samples_per_symbol: int, rolloff: float,
             span_symbols: int = RRC_SPAN_SYMBOLS) -> np.ndarray:
    """Unit-energy root-raised-cosine taps spanning `span_symbols` symbols."""
    sps = samples_per_symbol
    beta = rolloff
    n = np.arange(-span_symbols * sps // 2, span_symbols * sps // 2 + 1)
    t = n / sps
    taps = np.empty(len(t))
    singular = 1.0 / (4.0 * beta)
    for i, ti in enumerate(t):
        if ti == 0.0:
            taps[i] = 1.0 + beta * (4.0 / np.pi - 1.0)
        elif abs(abs(ti) - singular) < 1e-9:
            taps[i] = (beta / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta)))
        else:
            num = (np.sin(np.pi * ti * (1.0 - beta))
                   + 4.0 * beta * ti * np.cos(np.pi * ti * (1.0 + beta)))
            den = np.pi * ti * (1.0 - (4.0 * beta * ti) ** 2)
            taps[i] = num / den
    return taps / np.linalg.norm(taps)


def _linear_waveform(points: np.ndarray, sps: int, rolloff: float, length: int) -> np.ndarray:
    upsampled = np.zeros(len(points) * sps, dtype=complex)
    upsampled[::sps] = points
    taps = rrc_taps(sps, rolloff)
    shaped = np.convolve(upsampled, taps)
    delay = (len(taps) - 1) // 2
    return shaped[delay:delay + length]


def _cpfsk_waveform(nrz: np.ndarray, sps: int, length: int) -> np.ndarray:
    freq = np.repeat(nrz, sps)
    phase = np.cumsum(np.pi * CPFSK_MOD_INDEX * freq / sps)
    return np.exp(1j * phase)[:length]


def _gfsk_waveform(nrz: np.ndarray, sps: int, length: int) -> np.ndarray:
    freq = np.repeat(nrz, sps)
    half = GFSK_KERNEL_SPAN_SYMBOLS * sps // 2
    n = np.arange(-half, half + 1)
    sigma = sps * np.sqrt(np.log(2.0)) / (2.0 * np.pi * GFSK_BT)
    kernel = np.exp(-0.5 * (n / sigma) ** 2)
    kernel /= kernel.sum()
    smoothed = np.convolve(freq, kernel)
    phase = np.cumsum(np.pi * GFSK_MOD_INDEX * smoothed / sps)
    return np.exp(1j * phase)[half:half + length]


def synthesize_waveform(scheme: ModulationScheme, symbol_count: int, spec: GenSpec,
                        stream_seed: int = 0, symbols=None) -> np.ndarray:
    """Unit-average-power complex baseband waveform of length spec.signal_len.

    Symbols are drawn from `stream_seed` unless given explicitly. Requires
    symbol_count * samples_per_symbol >= signal_len.
    """
    scheme = ModulationScheme(scheme)
    sps = spec.samples_per_symbol
    if symbol_count * sps < spec.signal_len:
        raise ValueError(
            f"{symbol_count} symbols x {sps} sps cannot fill {spec.signal_len} samples")
    if symbols is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(stream_seed)))
        symbols = rng.integers(0, scheme.order, size=symbol_count)
    else:
        symbols = np.asarray(symbols, dtype=np.int64)
        if len(symbols) != symbol_count:
            raise ValueError("len(symbols) must equal symbol_count")
    return _modulate(scheme, symbols, spec)


def _modulate(scheme: ModulationScheme, symbols: np.ndarray, spec: GenSpec) -> np.ndarray:
    sps = spec.samples_per_symbol
    length = spec.signal_len
    if scheme.is_linear:
        wave = _linear_waveform(map_symbols(scheme, symbols), sps, spec.rrc_rolloff, length)
    else:
        nrz = map_symbols(scheme, symbols).real
        if scheme == ModulationScheme.CPFSK:
            wave = _cpfsk_waveform(nrz, sps, length)
        else:
            wave = _gfsk_waveform(nrz, sps, length)
    return wave / np.sqrt(np.mean(np.abs(wave) ** 2))


def awgn_noise(rng: np.random.Generator, n: int, snr_db: int) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise with per-sample variance
    10**(-snr_db/10), i.e. the noise power matching `snr_db` for a unit-power
    signal."""
    sigma2 = 10.0 ** (-snr_db / 10.0)
    parts = rng.normal(0.0, np.sqrt(sigma2 / 2.0), size=(2, n))
    return parts[0] + 1j * parts[1]


def apply_awgn(signal: np.ndarray, snr_db: int, noise_seed: int) -> np.ndarray:
    """Add AWGN at the given SNR; assumes `signal` has unit average power."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(noise_seed)))
    return signal + awgn_noise(rng, len(signal), snr_db)


def record_rng(spec: GenSpec, class_index: int, snr_index: int,
               record_index: int) -> np.random.Generator:
    """The stated splittable-seed rule: one independent stream per record."""
    ss = np.random.SeedSequence(spec.seed,
                                spawn_key=(class_index, snr_index, record_index))
    return np.random.Generator(np.random.PCG64(ss))


def make_record_components(spec: GenSpec, class_index: int, snr_index: int,
                           record_index: int) -> tuple[np.ndarray, np.ndarray]:
    """(clean unit-power waveform, injected noise) for one dataset cell entry."""
    rng = record_rng(spec, class_index, snr_index, record_index)
    scheme = spec.schemes[class_index]
    symbol_count = spec.signal_len // spec.samples_per_symbol + EXTRA_SYMBOLS
    symbols = rng.integers(0, scheme.order, size=symbol_count)
    clean = _modulate(scheme, symbols, spec)
    noise = awgn_noise(rng, spec.signal_len, spec.snr_levels[snr_index])
    return clean, noise


def generate_dataset(spec: GenSpec) -> SignalDataset:
    """All (scheme, SNR) cells, per_class_per_snr records each, ordered by
    (class, snr, record). Pure function of `spec`."""
    levels = spec.snr_levels
    n = spec.num_classes * len(levels) * spec.per_class_per_snr
    x = np.empty((n, 2, spec.signal_len), dtype=np.float32)
    labels = np.empty(n, dtype=np.uint16)
    snrs = np.empty(n, dtype=np.int16)
    i = 0
    for c in range(spec.num_classes):
        for s, level in enumerate(levels):
            for k in range(spec.per_class_per_snr):
                clean, noise = make_record_components(spec, c, s, k)
                sample = clean + noise
                x[i, 0] = sample.real
                x[i, 1] = sample.imag
                labels[i] = c
                snrs[i] = level
                i += 1
    return SignalDataset(x, labels, snrs, spec.num_classes)


def measure_empirical_snr(spec: GenSpec, snr_index: int, num_records: int | None = None) -> float:
    """Empirical SNR (dB) at one level: total clean power / total noise power,
    pooled over classes and records. Used by the data-fidelity checks."""
    per = spec.per_class_per_snr if num_records is None else num_records
    sig_power = 0.0
    noise_power = 0.0
    for c in range(spec.num_classes):
        for k in range(per):
            clean, noise = make_record_components(spec, c, snr_index, k)
            sig_power += float(np.sum(np.abs(clean) ** 2))
            noise_power += float(np.sum(np.abs(noise) ** 2))
    return 10.0 * math.log10(sig_power / noise_power)
