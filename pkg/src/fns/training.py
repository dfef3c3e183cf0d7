"""Training machinery: parameter flattening, corrector models, reverse-mode
gradients through the hybrid iteration, Adam, and the epoch loop.

Every stage of the loss pipeline (Jacobi sweeps, residuals, the corrector) is
linear in the state, so reverse mode reduces to running the conjugate
transposes of the forward stages on the adjoint state, taping only the
corrector's frequency-domain activations for the parameter products.

Complex parameters are stored as independent (re, im) pairs in the flat
vector.  Cogradient convention: for a complex parameter c the backward pass
produces cbar with dL/d re(c) = Re(cbar) and dL/d im(c) = Im(cbar); every
variant is pinned against central finite differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .corrector import (
    SpectralCorrector,
    apply_corrector,
    conv_periodic,
    corr_conj_periodic,
    reciprocal_symbol_scale,
)
from .errors import DomainError, ShapeMismatch, ZeroRhs
from .grids import fft2, odd_extend_adjoint
from .lfa import sampled_symbol
from .relax import SmootherSpec, error_propagation_adjoint, smooth
from .stencils import StencilField, apply_stencil, apply_stencil_adjoint

_RES_FLOOR = 1e-12  # items solved to the floor contribute a zero subgradient


# ---------------------------------------------------------------------------
# parameter vector


class ParamVector:
    """Flat float64 parameter array with named, disjoint segments."""

    def __init__(self):
        self.data = np.zeros(0)
        self._segments = {}

    def add(self, name: str, shape) -> None:
        if name in self._segments:
            raise ValueError(f"segment {name!r} already registered")
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        size = int(np.prod(shape))
        self._segments[name] = (self.data.size, shape, size)
        self.data = np.concatenate([self.data, np.zeros(size)])

    def get(self, name: str, data: np.ndarray | None = None) -> np.ndarray:
        off, shape, size = self._segments[name]
        src = self.data if data is None else data
        return src[off:off + size].reshape(shape)

    def set(self, name: str, values) -> None:
        off, shape, size = self._segments[name]
        self.data[off:off + size] = np.asarray(values, dtype=float).ravel()

    def segments(self):
        return dict(self._segments)

    @property
    def size(self) -> int:
        return self.data.size

    def zeros_like(self) -> np.ndarray:
        return np.zeros_like(self.data)


def get_complex(params: ParamVector, name: str, data=None) -> np.ndarray:
    return params.get(name + "_re", data) + 1j * params.get(name + "_im", data)


def set_complex(params: ParamVector, name: str, values) -> None:
    params.set(name + "_re", np.real(values))
    params.set(name + "_im", np.imag(values))


def add_complex_cograd(grad: np.ndarray, params: ParamVector, name: str, cbar) -> None:
    off, _, size = params.segments()[name + "_re"]
    grad[off:off + size] += np.real(cbar).ravel()
    off, _, size = params.segments()[name + "_im"]
    grad[off:off + size] += np.imag(cbar).ravel()


# ---------------------------------------------------------------------------
# problem items


@dataclass(frozen=True)
class ProblemItem:
    """One training tuple: the discrete operator, its RHS, and meta inputs."""

    stencil: StencilField
    f: np.ndarray
    meta_input: np.ndarray | None = None   # real field feeding the meta maps
    mask: object | None = None             # RegionMask for region_split
    params: dict = field(default_factory=dict)


def resample_to_lattice(a: np.ndarray, extended_n: int) -> np.ndarray:
    """Nearest-neighbor resample of a real field onto the n'(xn') lattice."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        idx = np.minimum((np.arange(extended_n) * a.shape[0]) // extended_n, a.shape[0] - 1)
        return a[idx]
    i0 = np.minimum((np.arange(extended_n) * a.shape[0]) // extended_n, a.shape[0] - 1)
    i1 = np.minimum((np.arange(extended_n) * a.shape[1]) // extended_n, a.shape[1] - 1)
    return a[np.ix_(i0, i1)]


def smoother_symbol_input(item: ProblemItem, smoother: SmootherSpec) -> np.ndarray:
    """Jacobi-symbol modulus on the lattice, the meta input for streak problems."""
    return np.abs(sampled_symbol(smoother, item.stencil).values)


# ---------------------------------------------------------------------------
# smooth rectifier (keeps central-difference gradient checks sharp)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# real periodic conv layers (meta maps)


def conv2d_real(weights: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Periodic conv, weights (out_ch, in_ch, k, k), x (in_ch, H, W)."""
    oc, ic, kh, kw = weights.shape
    r0, r1 = kh // 2, kw // 2
    out = np.zeros((oc,) + x.shape[1:])
    for a in range(kh):
        for b in range(kw):
            rolled = np.roll(x, (a - r0, b - r1), axis=(1, 2))
            out += np.einsum("oi,ihw->ohw", weights[:, :, a, b], rolled)
    return out + bias[:, None, None]


def conv2d_real_backward(weights: np.ndarray, x: np.ndarray, gout: np.ndarray):
    """Returns (gx, gweights, gbias) for conv2d_real."""
    oc, ic, kh, kw = weights.shape
    r0, r1 = kh // 2, kw // 2
    gx = np.zeros_like(x)
    gw = np.zeros_like(weights)
    for a in range(kh):
        for b in range(kw):
            rolled = np.roll(x, (a - r0, b - r1), axis=(1, 2))
            gw[:, :, a, b] = np.einsum("ohw,ihw->oi", gout, rolled)
            gx += np.einsum("oi,ohw->ihw", weights[:, :, a, b],
                            np.roll(gout, (r0 - a, r1 - b), axis=(1, 2)))
    return gx, gw, gout.sum(axis=(1, 2))


# ---------------------------------------------------------------------------
# corrector models


class DirectModel:
    """Per-family trained diagonal/conv corrector.

    lambda_tilde = (w_re + i w_im) * scale, with `scale` a fixed reciprocal
    mean-symbol field (ones when not supplied).  Kernel segments are always
    registered; the diagonal variant leaves them unused, so their gradient is
    identically zero.
    """

    def __init__(self, grid, variant: str = "diagonal", depth: int = 1, ksize: int = 5,
                 scale: np.ndarray | None = None, seed: int = 0):
        if variant not in ("diagonal", "conv"):
            raise DomainError(f"DirectModel variant must be diagonal or conv, not {variant!r}")
        self.grid = grid
        self.variant = variant
        self.depth = depth
        self.ksize = ksize
        ne = grid.extended_n
        lat_shape = (ne,) * grid.ndim
        self.scale = np.ones(lat_shape, dtype=complex) if scale is None else scale
        self.params = ParamVector()
        self.params.add("w_re", lat_shape)
        self.params.add("w_im", lat_shape)
        self._kshape = (1, ksize) if grid.ndim == 1 else (ksize, ksize)
        for d in range(depth):
            self.params.add(f"k{d}_re", self._kshape)
            self.params.add(f"k{d}_im", self._kshape)
        self.init_params(seed)

    @property
    def active_kernels(self) -> int:
        return self.depth if self.variant == "conv" else 0

    def init_params(self, seed: int) -> None:
        rng = np.random.Generator(np.random.Philox(key=[seed, 0xd17ec7]))
        self.params.set("w_re", np.ones(self._lat_shape()))
        self.params.set("w_im", np.zeros(self._lat_shape()))
        for d in range(self.depth):
            ident = np.zeros(self._kshape)
            ident[tuple(s // 2 for s in self._kshape)] = 1.0
            self.params.set(f"k{d}_re", ident + 1e-3 * rng.standard_normal(self._kshape))
            self.params.set(f"k{d}_im", 1e-3 * rng.standard_normal(self._kshape))

    def _lat_shape(self):
        return (self.grid.extended_n,) * self.grid.ndim

    def build(self, item: ProblemItem | None = None, data: np.ndarray | None = None) -> SpectralCorrector:
        lam = get_complex(self.params, "w", data) * self.scale
        kernels = tuple(get_complex(self.params, f"k{d}", data)
                        for d in range(self.active_kernels))
        return SpectralCorrector(self.grid, "conv" if kernels else "diagonal", lam, kernels)

    def backprop(self, item, tape, grad: np.ndarray, lam_bar, kernel_bars,
                 data: np.ndarray | None = None) -> None:
        add_complex_cograd(grad, self.params, "w", lam_bar * np.conj(self.scale))
        for d in range(self.active_kernels):
            add_complex_cograd(grad, self.params, f"k{d}", kernel_bars[d])

    def rescaled(self, grid, scale: np.ndarray | None = None) -> "DirectModel":
        """Trained weights transferred to another grid (lambda interpolated
        bilinearly on the normalized frequency lattice; kernels copied)."""
        from .corrector import interpolate_lambda

        clone = DirectModel(grid, self.variant, self.depth, self.ksize, scale)
        set_complex(clone.params, "w",
                    interpolate_lambda(get_complex(self.params, "w"), grid.extended_n))
        for d in range(self.depth):
            set_complex(clone.params, f"k{d}", get_complex(self.params, f"k{d}"))
        return clone


class MetaMap:
    """Compact conv map from a real lattice field to corrector parameters.

    kind="lambda": two periodic conv layers with a softplus between; the two
    output channels form the complex weight w(theta).  kind="transition":
    the same trunk, then global average pooling and an affine head emitting
    the (re, im) kernel taps, initialized at identity kernels plus noise.
    """

    def __init__(self, kind: str, channels: int = 8, ksize: int = 5,
                 depth: int = 1, kernel_size: int = 5):
        if kind not in ("lambda", "transition"):
            raise DomainError(f"unknown meta kind {kind!r}")
        self.kind = kind
        self.channels = channels
        self.ksize = ksize
        self.depth = depth            # number of corrector kernels emitted
        self.kernel_size = kernel_size

    def register(self, params: ParamVector, prefix: str, seed: int) -> None:
        c, k = self.channels, self.ksize
        rng = np.random.Generator(np.random.Philox(key=[seed, 0x3e7a]))
        out_ch = 2 if self.kind == "lambda" else self.channels
        params.add(prefix + "w1", (c, 1, k, k))
        params.add(prefix + "b1", (c,))
        params.add(prefix + "w2", (out_ch, c, k, k))
        params.add(prefix + "b2", (out_ch,))
        params.set(prefix + "w1", rng.standard_normal((c, 1, k, k)) * (0.3 / k))
        params.set(prefix + "b1", np.zeros(c))
        params.set(prefix + "w2", rng.standard_normal((out_ch, c, k, k)) * (0.05 / (k * np.sqrt(c))))
        b2 = np.zeros(out_ch)
        if self.kind == "lambda":
            b2[0] = 1.0  # start near w = 1: the reciprocal-symbol corrector
        params.set(prefix + "b2", b2)
        if self.kind == "transition":
            nk = 2 * self.depth * self.kernel_size**2
            params.add(prefix + "head_w", (nk, out_ch))
            params.add(prefix + "head_b", (nk,))
            params.set(prefix + "head_w", rng.standard_normal((nk, out_ch)) * 0.01)
            head_b = np.zeros(nk)
            mid = self.kernel_size**2 // 2
            for d in range(self.depth):
                head_b[2 * d * self.kernel_size**2 + mid] = 1.0
            params.set(prefix + "head_b", head_b + 1e-3 * rng.standard_normal(nk))

    def forward(self, params: ParamVector, prefix: str, x: np.ndarray, data=None):
        """Returns (output, tape); x is the (H, W) real input field."""
        x0 = x[None, :, :]
        w1 = params.get(prefix + "w1", data)
        b1 = params.get(prefix + "b1", data)
        w2 = params.get(prefix + "w2", data)
        b2 = params.get(prefix + "b2", data)
        z1 = conv2d_real(w1, b1, x0)
        a1 = softplus(z1)
        z2 = conv2d_real(w2, b2, a1)
        tape = {"x0": x0, "z1": z1, "a1": a1, "z2": z2}
        if self.kind == "lambda":
            return z2[0] + 1j * z2[1], tape
        pooled = z2.mean(axis=(1, 2))
        hw = params.get(prefix + "head_w", data)
        hb = params.get(prefix + "head_b", data)
        flat = hw @ pooled + hb
        tape["pooled"] = pooled
        ks = self.kernel_size
        kernels = []
        for d in range(self.depth):
            seg = flat[2 * d * ks * ks:(2 * d + 2) * ks * ks]
            kernels.append(seg[:ks * ks].reshape(ks, ks) + 1j * seg[ks * ks:].reshape(ks, ks))
        return tuple(kernels), tape

    def backward(self, params: ParamVector, prefix: str, tape, out_bar, grad: np.ndarray,
                 data=None) -> None:
        """out_bar: complex field (lambda) or sequence of complex kernel cograds."""
        w1 = params.get(prefix + "w1", data)
        w2 = params.get(prefix + "w2", data)
        if self.kind == "lambda":
            gz2 = np.stack([np.real(out_bar), np.imag(out_bar)])
        else:
            ks = self.kernel_size
            flat_bar = np.zeros(2 * self.depth * ks * ks)
            for d, kb in enumerate(out_bar):
                flat_bar[2 * d * ks * ks:(2 * d + 1) * ks * ks] = np.real(kb).ravel()
                flat_bar[(2 * d + 1) * ks * ks:(2 * d + 2) * ks * ks] = np.imag(kb).ravel()
            hw = params.get(prefix + "head_w", data)
            off, _, size = params.segments()[prefix + "head_w"]
            grad[off:off + size] += np.outer(flat_bar, tape["pooled"]).ravel()
            off, _, size = params.segments()[prefix + "head_b"]
            grad[off:off + size] += flat_bar
            gpooled = hw.T @ flat_bar
            npix = tape["z2"].shape[1] * tape["z2"].shape[2]
            gz2 = np.broadcast_to((gpooled / npix)[:, None, None], tape["z2"].shape).copy()
        ga1, gw2, gb2 = conv2d_real_backward(w2, tape["a1"], gz2)
        gz1 = ga1 * sigmoid(tape["z1"])
        _, gw1, gb1 = conv2d_real_backward(w1, tape["x0"], gz1)
        for name, g in ((prefix + "w1", gw1), (prefix + "b1", gb1),
                        (prefix + "w2", gw2), (prefix + "b2", gb2)):
            off, _, size = params.segments()[name]
            grad[off:off + size] += g.ravel()


class MetaModel:
    """Discretization-invariant model: meta subnets emit the corrector per item.

    The lambda subnet output multiplies the per-item reciprocal mean-symbol
    scale, so the trained weights transfer across grid sizes.
    """

    def __init__(self, variant: str = "conv", channels: int = 8, depth: int = 1,
                 ksize: int = 5, seed: int = 0):
        self.variant = variant
        self.meta_lambda = MetaMap("lambda", channels=channels)
        self.meta_t = (MetaMap("transition", channels=channels, depth=depth,
                               kernel_size=ksize) if variant == "conv" else None)
        self.params = ParamVector()
        self.meta_lambda.register(self.params, "ml_", seed)
        if self.meta_t is not None:
            self.meta_t.register(self.params, "mt_", seed + 1)

    def build(self, item: ProblemItem, data: np.ndarray | None = None,
              with_tape: bool = False):
        grid = item.stencil.grid
        if item.meta_input is None:
            raise DomainError("meta mode needs ProblemItem.meta_input")
        x = resample_to_lattice(item.meta_input, grid.extended_n)
        w, tape_l = self.meta_lambda.forward(self.params, "ml_", x, data)
        scale = reciprocal_symbol_scale(item.stencil)
        lam = w * scale
        kernels, tape_t = (), None
        if self.meta_t is not None:
            kernels, tape_t = self.meta_t.forward(self.params, "mt_", x, data)
        hc = SpectralCorrector(grid, "conv" if kernels else "diagonal", lam, tuple(kernels))
        tape = {"lambda": tape_l, "transition": tape_t, "scale": scale}
        return (hc, tape) if with_tape else hc

    def backprop(self, item, tape, grad: np.ndarray, lam_bar, kernel_bars,
                 data: np.ndarray | None = None) -> None:
        self.meta_lambda.backward(self.params, "ml_", tape["lambda"],
                                  lam_bar * np.conj(tape["scale"]), grad, data)
        if self.meta_t is not None:
            self.meta_t.backward(self.params, "mt_", tape["transition"], kernel_bars, grad, data)


class RegionSplitModel:
    """Two direct sub-models recombined through each item's region mask."""

    def __init__(self, grid, variant: str = "diagonal", depth: int = 1, ksize: int = 5,
                 scales=(None, None), seed: int = 0):
        self.grid = grid
        self.sub = (DirectModel(grid, variant, depth, ksize, scales[0], seed),
                    DirectModel(grid, variant, depth, ksize, scales[1], seed + 1))
        self.params = ParamVector()
        for i, m in enumerate(self.sub):
            for name, (_, shape, _) in m.params.segments().items():
                self.params.add(f"r{i}_{name}", shape)
                self.params.set(f"r{i}_{name}", m.params.get(name))

    def _sub_data(self, i: int, data: np.ndarray | None) -> np.ndarray:
        parts = [self.params.get(f"r{i}_{name}", data).ravel()
                 for name in self.sub[i].params.segments()]
        return np.concatenate(parts)

    def build(self, item: ProblemItem, data: np.ndarray | None = None) -> SpectralCorrector:
        if item.mask is None:
            raise DomainError("region_split needs ProblemItem.mask")
        parts = tuple(self.sub[i].build(item, self._sub_data(i, data)) for i in range(2))
        return SpectralCorrector(self.grid, "region_split", parts=parts, mask=item.mask)

    def backprop(self, item, tape, grad: np.ndarray, lam_bars, kernel_bars,
                 data: np.ndarray | None = None) -> None:
        for i in range(2):
            sub_grad = self.sub[i].params.zeros_like()
            self.sub[i].backprop(item, None, sub_grad, lam_bars[i], kernel_bars[i])
            pos = 0
            for name, (_, _, size) in self.sub[i].params.segments().items():
                goff, _, gsize = self.params.segments()[f"r{i}_{name}"]
                grad[goff:goff + gsize] += sub_grad[pos:pos + gsize]
                pos += gsize


# ---------------------------------------------------------------------------
# reverse-mode engine


def _kernel_cograd_conv(kernel: np.ndarray, x_in: np.ndarray, g_out: np.ndarray) -> np.ndarray:
    """Tap cogradients of out = sum_d k_d roll(x_in, d)."""
    r0, r1 = kernel.shape[0] // 2, kernel.shape[1] // 2
    kb = np.zeros(kernel.shape, dtype=complex)
    for a in range(kernel.shape[0]):
        for b in range(kernel.shape[1]):
            kb[a, b] = np.vdot(np.roll(x_in, (a - r0, b - r1), axis=(0, 1)), g_out)
    return kb


def _kernel_cograd_corr(kernel: np.ndarray, x_in: np.ndarray, g_out: np.ndarray) -> np.ndarray:
    """Tap cogradients of out = sum_d conj(k_d) roll(x_in, -d)."""
    r0, r1 = kernel.shape[0] // 2, kernel.shape[1] // 2
    kb = np.zeros(kernel.shape, dtype=complex)
    for a in range(kernel.shape[0]):
        for b in range(kernel.shape[1]):
            kb[a, b] = np.vdot(g_out, np.roll(x_in, (r0 - a, r1 - b), axis=(0, 1)))
    return kb


def _corrector_vjp(hc: SpectralCorrector, act, ybar: np.ndarray):
    """Backward through one flat corrector application.

    Returns (rbar, lam_bar, kernel_bars) given the output cotangent ybar.
    """
    grid = hc.grid
    ne = grid.extended_n
    one_d = grid.ndim == 1
    emb = np.zeros((ne,) * grid.ndim, dtype=complex)
    emb[(slice(1, ne // 2),) * grid.ndim] = ybar          # adjoint of restrict
    v = fft2(emb, inverse=True)                            # adjoint of final F
    if one_d:
        v = v[None, :]
    kernels = hc.kernels
    nk = len(kernels)
    kernel_bars = [None] * nk
    # C stack: z3 = conv(k_{L-1})( ... conv(k_0)(z2)); recompute layer inputs
    xs = [act.post_lambda]
    for k in kernels[:-1]:
        xs.append(conv_periodic(k, xs[-1]))
    for l in range(nk - 1, -1, -1):
        kernel_bars[l] = _kernel_cograd_conv(kernels[l], xs[l], v)
        v = corr_conj_periodic(kernels[l], v)
    # lambda product: z2 = lam (.) z1
    lam = hc.lambda_tilde[None, :] if one_d else hc.lambda_tilde
    lam_bar = v * np.conj(act.post_c_star)
    v = np.conj(lam) * v
    # C* stack: z1 = corr(k_0)( ... corr(k_{L-1})(z0)); recompute layer inputs
    ys = [act.post_f_inv]
    for k in reversed(kernels[1:] if nk else []):
        ys.append(corr_conj_periodic(k, ys[-1]))
    # ys[i] is the input of the (i+1)-th applied layer, which uses kernel L-1-i
    for l in range(nk):
        kernel_bars[l] += _kernel_cograd_corr(kernels[l], ys[nk - 1 - l], v)
        v = conv_periodic(kernels[l], v)
    spec = v[0] if one_d else v
    rbar = odd_extend_adjoint(fft2(spec))                  # adjoint of F^-1 and extend
    if one_d:
        lam_bar = lam_bar[0]
    return rbar, lam_bar, kernel_bars


def _forward_item(item: ProblemItem, hc: SpectralCorrector, smoother: SmootherSpec, k_outer: int):
    stencil = item.stencil
    f = np.asarray(item.f, dtype=complex)
    u = np.zeros(stencil.grid.shape, dtype=complex)
    acts = []
    for _ in range(k_outer):
        if smoother.sweeps > 0:
            u = smooth(smoother, stencil, u, f)
        r = f - apply_stencil(stencil, u)
        if hc.variant == "region_split":
            pair = []
            y = np.zeros_like(u)
            for i, part in enumerate(hc.parts):
                yi, ai = apply_corrector(part, r, capture=True)
                y = y + hc.mask.indicator(i + 1) * yi
                pair.append(ai)
            acts.append(tuple(pair))
        else:
            y, a = apply_corrector(hc, r, capture=True)
            acts.append(a)
        u = u + y
    r_fin = f - apply_stencil(stencil, u)
    return u, r_fin, acts


def _backward_item(item, hc, smoother, acts, rbar_fin):
    """Adjoint sweep; returns corrector-space cogradients."""
    stencil = item.stencil
    split = hc.variant == "region_split"
    if split:
        lam_bars = [np.zeros_like(hc.parts[i].lambda_tilde) for i in range(2)]
        kernel_bars = [[np.zeros_like(k) for k in hc.parts[i].kernels] for i in range(2)]
    else:
        lam_bars = np.zeros_like(hc.lambda_tilde)
        kernel_bars = [np.zeros_like(k) for k in hc.kernels]
    ubar = -apply_stencil_adjoint(stencil, rbar_fin)
    for act in reversed(acts):
        ybar = ubar
        if split:
            rbar = np.zeros(stencil.grid.shape, dtype=complex)
            for i, part in enumerate(hc.parts):
                rb, lb, kbs = _corrector_vjp(part, act[i], hc.mask.indicator(i + 1) * ybar)
                rbar += rb
                lam_bars[i] += lb
                for d, kb in enumerate(kbs):
                    kernel_bars[i][d] += kb
        else:
            rbar, lb, kbs = _corrector_vjp(hc, act, ybar)
            lam_bars += lb
            for d, kb in enumerate(kbs):
                kernel_bars[d] += kb
        ubar = ubar - apply_stencil_adjoint(stencil, rbar)
        if smoother.sweeps > 0:
            ubar = error_propagation_adjoint(smoother, stencil, ubar)
    return lam_bars, kernel_bars


def loss(batch, model, smoother: SmootherSpec, k_outer: int,
         data: np.ndarray | None = None) -> float:
    """Mean relative residual ||f - S u^K|| / ||f|| after K hybrid iterations
    from a zero start."""
    total = 0.0
    for item in batch:
        fnorm = float(np.linalg.norm(item.f))
        if fnorm == 0.0:
            raise ZeroRhs("batch item has ||f|| = 0")
        hc = model.build(item, data)
        _, r_fin, _ = _forward_item(item, hc, smoother, k_outer)
        total += float(np.linalg.norm(r_fin)) / fnorm
    return total / len(batch)


def loss_and_grad(batch, model, smoother: SmootherSpec, k_outer: int,
                  data: np.ndarray | None = None):
    """Loss plus its exact gradient w.r.t. every real parameter of the model."""
    grad_vec = model.params.zeros_like()
    total = 0.0
    nb = len(batch)
    for item in batch:
        fnorm = float(np.linalg.norm(item.f))
        if fnorm == 0.0:
            raise ZeroRhs("batch item has ||f|| = 0")
        if isinstance(model, MetaModel):
            hc, tape = model.build(item, data, with_tape=True)
        else:
            hc, tape = model.build(item, data), None
        _, r_fin, acts = _forward_item(item, hc, smoother, k_outer)
        rn = float(np.linalg.norm(r_fin))
        total += rn / fnorm
        if rn <= _RES_FLOOR * max(1.0, fnorm):
            continue  # at the nonsmooth minimum: zero subgradient
        rbar = r_fin / (rn * fnorm * nb)
        lam_bars, kernel_bars = _backward_item(item, hc, smoother, acts, rbar)
        model.backprop(item, tape, grad_vec, lam_bars, kernel_bars, data)
    return total / nb, grad_vec


def grad(batch, model, smoother: SmootherSpec, k_outer: int,
         data: np.ndarray | None = None) -> np.ndarray:
    return loss_and_grad(batch, model, smoother, k_outer, data)[1]


# ---------------------------------------------------------------------------
# Adam and the training loop


def adam_init(n: int) -> dict:
    return {"m": np.zeros(n), "v": np.zeros(n), "t": 0}


def adam_step(params: np.ndarray, grads: np.ndarray, state: dict, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Standard bias-corrected Adam update; returns (new_params, state)."""
    if params.shape != grads.shape:
        raise ShapeMismatch(f"params {params.shape} vs grads {grads.shape}")
    t = state["t"] + 1
    m = beta1 * state["m"] + (1.0 - beta1) * grads
    v = beta2 * state["v"] + (1.0 - beta2) * grads * grads
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    new = params - lr * mhat / (np.sqrt(vhat) + eps)
    return new, {"m": m, "v": v, "t": t}


@dataclass(frozen=True)
class TrainConfig:
    """Schedule: lr halves and K grows by one every `period` epochs."""

    k_outer: int = 1
    sweeps: int = 10
    batch: int = 8
    epochs: int = 100
    lr: float = 1e-4
    lr_halving_period: int = 100
    k_increase_period: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("k_outer", "sweeps", "batch", "epochs", "lr_halving_period",
                     "k_increase_period"):
            if getattr(self, name) < (0 if name == "sweeps" else 1):
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr <= 0:
            raise DomainError(f"lr must be positive, got {self.lr}")


def train(dataset, model, smoother: SmootherSpec, cfg: TrainConfig, log=None):
    """Epoch loop over fixed sequential mini-batches (deterministic order).

    Returns (params, history) with history rows (epoch, loss, lr, K).
    """
    if not dataset:
        raise DomainError("dataset is empty")
    sm = replace(smoother, sweeps=cfg.sweeps)
    data = model.params.data.copy()
    state = adam_init(model.params.size)
    history = []
    nb = math.ceil(len(dataset) / cfg.batch)
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.lr * 0.5 ** ((epoch - 1) // cfg.lr_halving_period)
        k_outer = cfg.k_outer + (epoch - 1) // cfg.k_increase_period
        running = 0.0
        for b in range(nb):
            batch = dataset[b * cfg.batch:(b + 1) * cfg.batch]
            value, g = loss_and_grad(batch, model, sm, k_outer, data)
            data, state = adam_step(data, g, state, lr)
            running += value * len(batch)
        history.append((epoch, running / len(dataset), lr, k_outer))
        model.params.data = data  # keep the model live for periodic snapshots
        if log is not None:
            log(history[-1])
    return model.params, history
