"""Poisson-derived convolution kernels and an FFT band bank.

Kernels (scale t > 0)::

    K_t(x)   = t x / (x^2 + t^2)^2           = -(pi/2) P_t'(x)
    J_t(x)   = (t^2 - x^2) / (x^2 + t^2)^2   =  pi Q_t'(x)
    psi_t(x) = t^-1 psi(x/t),  psi(x) = (3x^2 - 1)/(x^2 + 1)^3,  (K_t)' = -t^-2 psi_t
    phi_t(x) = t^2 (J_t)'(x),  phi(x) = (2x^3 - 6x)/(x^2 + 1)^3

with P_t, Q_t the Poisson and conjugate Poisson kernels.  With the Fourier
convention f^(xi) = int f(x) exp(-2 pi i x xi) dx one has
psi_t^(xi) = c t^2 xi^2 exp(-2 pi t |xi|) and phi_t = 2 H psi_t, H the Hilbert
transform (multiplier -i sgn xi).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .geometry import SampledFunction

FAMILIES = ("K", "J", "psi", "phi", "poisson", "conjugate_poisson")
WRAP_TOL = 1e-6
SCALES_PER_OCTAVE = 4


class KernelError(ValueError):
    pass


@lru_cache(maxsize=None)
def psi_hat_constant() -> float:
    """The constant c in psi^(xi) = c xi^2 exp(-2 pi |xi|), by quadrature at xi = 1.

    psi is even, so psi^(1) = 2 int_0^inf psi(x) cos(2 pi x) dx (QAWF rule).
    The closed form is -2 pi^3.
    """
    val, _ = integrate.quad(lambda x: (3 * x * x - 1) / (x * x + 1) ** 3, 0, np.inf,
                            weight="cos", wvar=2 * np.pi, limlst=200)
    return 2 * val * math.exp(2 * math.pi)


@dataclass(frozen=True)
class Kernel:
    family: str
    t: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if not self.t > 0:
            raise KernelError("kernel scale must be positive")

    def __call__(self, x):
        return kernel_eval(self, x)

    def hat(self, xi):
        """Fourier transform on frequencies xi (complex array)."""
        xi = np.asarray(xi, float)
        t = self.t
        e = np.exp(-2 * np.pi * t * np.abs(xi))
        if self.family == "psi":
            return (psi_hat_constant() * t * t * xi * xi * e).astype(complex)
        if self.family == "phi":
            return -2j * np.sign(xi) * psi_hat_constant() * t * t * xi * xi * e
        if self.family == "K":
            # K_t = -t^2 psi_t' integrated: K^ = -i pi^2 t xi e
            return -1j * np.pi ** 2 * t * xi * e
        if self.family == "J":
            return (2 * np.pi ** 2 * t * np.abs(xi) * e).astype(complex)
        if self.family == "poisson":
            return e.astype(complex)
        return -1j * np.sign(xi) * e


def kernel_eval(kernel: Kernel, x):
    """Closed-form value of the kernel at x."""
    x = np.asarray(x, float)
    t = kernel.t
    q = x * x + t * t
    fam = kernel.family
    if fam == "psi":
        return t ** 3 * (3 * x * x - t * t) / q ** 3
    if fam == "K":
        return t * x / q ** 2
    if fam == "J":
        return (t * t - x * x) / q ** 2
    if fam == "phi":
        return t ** 2 * (2 * x ** 3 - 6 * t * t * x) / q ** 3
    if fam == "poisson":
        return t / (np.pi * q)
    return x / (np.pi * q)


def psi(x):
    x = np.asarray(x, float)
    return (3 * x * x - 1) / (x * x + 1) ** 3


def phi(x):
    x = np.asarray(x, float)
    return (2 * x ** 3 - 6 * x) / (x * x + 1) ** 3


# ---------------------------------------------------------------------------
# identities


@dataclass
class RelationReport:
    t: float
    step: float
    scaling_error: float
    derivative_error: float
    hilbert_scalar: float
    hilbert_residual: float
    poisson_constant: float
    conjugate_constant: float
    psi_integral: float

    def as_dict(self):
        return dict(self.__dict__)


def _fft_hilbert(values: np.ndarray) -> np.ndarray:
    xi = np.fft.fftfreq(values.size)
    return np.real(np.fft.ifft(np.fft.fft(values) * (-1j * np.sign(xi))))


def relation_checks(step: float, t: float, half_width: float | None = None) -> RelationReport:
    """Numerical checks of the kernel identities at scale t on a grid of given step.

    * scaling: psi_t(x) against t^-1 psi(x/t) (sup error);
    * derivative: central difference of K_t against -t^-2 psi_t, relative sup error;
    * Hilbert: FFT Hilbert transform of sampled psi_t against phi_t, one
      least-squares scalar and the relative L2 residual;
    * Poisson: least-squares constants in K_t = c P_t' and J_t = c Q_t'
      (closed forms -pi/2 and pi);
    * int psi over [-100, 100].
    """
    if not (step > 0 and t > 0):
        raise KernelError("step and t must be positive")
    if step > t / 8:
        raise KernelError(f"grid step {step} does not resolve scale {t} (need <= t/8)")
    if half_width is None:
        half_width = 512 * t
    n = 1 << int(math.ceil(math.log2(2 * half_width / step)))
    x = (np.arange(n) - n // 2) * step
    ps = kernel_eval(Kernel("psi", t), x)
    scaling = float(np.max(np.abs(ps - psi(x / t) / t)))

    h = step * 1e-2
    dk = (kernel_eval(Kernel("K", t), x + h) - kernel_eval(Kernel("K", t), x - h)) / (2 * h)
    target = -ps / t ** 2
    deriv = float(np.max(np.abs(dk - target)) / np.max(np.abs(target)))

    hp = _fft_hilbert(ps)
    ph = kernel_eval(Kernel("phi", t), x)
    core = np.abs(x) <= half_width / 4
    c_h = float(np.dot(ph[core], hp[core]) / np.dot(hp[core], hp[core]))
    resid = float(np.linalg.norm(ph[core] - c_h * hp[core]) / np.linalg.norm(ph[core]))

    q = x * x + t * t
    dp = -2 * t * x / (np.pi * q ** 2)
    dq = (t * t - x * x) / (np.pi * q ** 2)
    kk = kernel_eval(Kernel("K", t), x)
    jj = kernel_eval(Kernel("J", t), x)
    c_p = float(np.dot(kk, dp) / np.dot(dp, dp))
    c_q = float(np.dot(jj, dq) / np.dot(dq, dq))

    # antiderivative of psi is -x/(x^2+1)^2 = -K
    integral = float(-(kernel_eval(Kernel("K"), 100.0) - kernel_eval(Kernel("K"), -100.0)))
    return RelationReport(t, step, scaling, deriv, c_h, resid, c_p, c_q, integral)


# ---------------------------------------------------------------------------
# spectral bank


def log_scales(t_min: float, t_max: float, per_octave: int = SCALES_PER_OCTAVE) -> np.ndarray:
    """Geometric grid t_min * 2^(k/per_octave) covering [t_min, t_max]."""
    if not (0 < t_min <= t_max):
        raise KernelError("need 0 < t_min <= t_max")
    k = int(math.ceil(per_octave * math.log2(t_max / t_min) - 1e-9))
    return t_min * 2.0 ** (np.arange(k + 1) / per_octave)


@dataclass(eq=False)
class SpectralBank:
    """Frequency multipliers psi_t^ on the FFT grid of a padded signal.

    The signal occupies the first ``n_signal`` samples of a length-``size``
    buffer; the rest is zero padding.
    """
    step: float
    size: int
    n_signal: int
    scales: np.ndarray
    per_octave: int = SCALES_PER_OCTAVE
    family: str = "psi"
    freqs: np.ndarray = field(init=False, repr=False)
    multipliers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.scales = np.asarray(self.scales, float)
        self.freqs = np.fft.fftfreq(self.size, d=self.step)
        m = np.stack([Kernel(self.family, t).hat(self.freqs) for t in self.scales])
        if self.family == "psi":
            m = m.real
        m.setflags(write=False)
        self.multipliers = m

    @classmethod
    def for_function(cls, f: SampledFunction, scales, per_octave: int = SCALES_PER_OCTAVE,
                     family: str = "psi") -> "SpectralBank":
        """Bank sized for f: padding >= 8 max scale per side, FFT size the next
        power of two >= 4 (signal + padding)."""
        scales = np.asarray(scales, float)
        pad = int(math.ceil(8 * scales.max() / f.step))
        n = f.values.size
        size = 1 << int(math.ceil(math.log2(4 * (n + 2 * pad))))
        return cls(f.step, size, n, scales, per_octave, family)

    def symmetry_error(self) -> float:
        """Largest violation of the parity of the cached multipliers.

        psi^ must be real and even, phi^ imaginary and odd.
        """
        m = np.asarray(self.multipliers, complex)
        mirror = np.stack([Kernel(self.family, t).hat(-self.freqs) for t in self.scales])
        if self.family == "phi":
            return float(max(np.max(np.abs(m.real)), np.max(np.abs(m + mirror))))
        return float(max(np.max(np.abs(m.imag)), np.max(np.abs(m - mirror))))


@dataclass
class BandResult:
    scales: np.ndarray
    bands: np.ndarray          # (n_scales, size) real convolutions on the buffer grid
    origin: float
    step: float
    wrap_ratio: np.ndarray     # per-scale energy fraction near the periodic seam

    @property
    def x(self):
        return self.origin + self.step * np.arange(self.bands.shape[1])

    def norms(self, p: float) -> np.ndarray:
        return (np.sum(np.abs(self.bands) ** p, axis=1) * self.step) ** (1.0 / p)


def convolve_bank(f: SampledFunction, bank: SpectralBank, workers: int = 1,
                  check_wrap: bool = True) -> BandResult:
    """psi_t * f for every scale of the bank (linear convolution via FFT).

    The seam region (the middle half of the zero padding, farthest from the
    signal on the periodic buffer) must carry at most WRAP_TOL of the band
    energy, otherwise KernelError is raised.
    """
    if f.step != bank.step or f.values.size != bank.n_signal:
        raise KernelError("bank was built for a different grid")
    buf = np.zeros(bank.size)
    buf[: f.values.size] = f.values
    fh = np.fft.fft(buf)
    size = bank.size
    n = bank.n_signal
    free = size - n
    seam = slice(n + free // 4, n + 3 * free // 4)

    def one(k):
        return np.real(np.fft.ifft(fh * bank.multipliers[k]))

    idx = range(len(bank.scales))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            bands = list(ex.map(one, idx))
    else:
        bands = [one(k) for k in idx]
    bands = np.stack(bands) if bands else np.zeros((0, size))
    # roll so that the signal sits in the middle of the buffer
    shift = free // 2
    bands = np.roll(bands, shift, axis=1)
    seam = slice((seam.start + shift) % size, (seam.stop + shift) % size)
    total = np.sum(bands ** 2, axis=1)
    if seam.start < seam.stop:
        edge = np.sum(bands[:, seam] ** 2, axis=1)
    else:
        edge = np.sum(bands[:, seam.start:] ** 2, axis=1) + np.sum(bands[:, :seam.stop] ** 2, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(total > 0, edge / np.where(total > 0, total, 1.0), 0.0)
    if check_wrap and np.any(ratio > WRAP_TOL):
        k = int(np.argmax(ratio))
        raise KernelError(f"wraparound: seam energy fraction {ratio[k]:.3g} at t={bank.scales[k]:.4g}"
                          " (increase padding)")
    origin = f.origin - shift * f.step
    return BandResult(bank.scales, bands, origin, f.step, ratio)


def direct_convolution(f: SampledFunction, t: float, points) -> np.ndarray:
    """psi_t * f at the given points by direct Riemann summation on f's grid."""
    points = np.asarray(points, float)
    k = Kernel("psi", t)
    return np.array([np.sum(k(p - f.x) * f.values) * f.step for p in points])


@dataclass
class SquareFunction:
    s: float
    p: float
    scales: np.ndarray
    band_norms: np.ndarray
    contributions: np.ndarray
    integral: float

    @property
    def value(self) -> float:
        return self.integral ** (1.0 / self.p)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "band_norm", "contribution"])
            for row in zip(self.scales, self.band_norms, self.contributions):
                w.writerow([f"{v:.10g}" for v in row])


def _log_weights(scales: np.ndarray) -> np.ndarray:
    """Trapezoid weights in log t."""
    if scales.size == 1:
        return np.ones(1)
    d = np.diff(np.log(scales))
    w = np.zeros(scales.size)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def square_function(f: SampledFunction, bank: SpectralBank, s: float, p: float,
                    workers: int = 1, bands: BandResult | None = None,
                    stride: int = 1) -> SquareFunction:
    """int ||t^-s psi_t * f||_p^p dt/t, trapezoid in log t over the bank scales.

    ``stride`` uses every stride-th scale only (stride = per_octave gives the
    dyadic sum).
    """
    if not np.any(f.values):
        z = np.zeros(bank.scales[::stride].size)
        return SquareFunction(s, p, bank.scales[::stride], z, z.copy(), 0.0)
    if bands is None:
        bands = convolve_bank(f, bank, workers)
    scales = bank.scales[::stride]
    norms = bands.norms(p)[::stride]
    contrib = (scales ** (-s) * norms) ** p * _log_weights(scales)
    return SquareFunction(s, p, scales, norms, contrib, float(np.sum(contrib)))
