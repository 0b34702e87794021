"""Compact CycleGAN architecture notation: parsing and shape inference.

Grammar (comma- or hyphen-separated tokens):

    c7s1-K   7x7 conv, stride 1, K filters (generator stem / head)
    dK       3x3 conv, stride 2, K filters (downsampling)
    RK       residual block, two 3x3 convs, K filters; RKxN repeats it N times
    uK       3x3 fractional-strided conv, stride 1/2, K filters (upsampling)
    CK       4x4 conv, stride 2, K filters (discriminator stage)
    final    4x4 stride-1 conv to 1 channel (appended implicitly for
             discriminators when absent)

Spatial rules assume same-padding for strided layers (ceil division) and
pad-1 kernel-4 arithmetic for the final discriminator conv. InstanceNorm is
treated as parameter-free, so parameter counts cover convolution weights and
biases only.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

from .errors import ArchParseError, ArchShapeError


class Role(Enum):
    GENERATOR = "generator"
    DISCRIMINATOR = "discriminator"


class LayerKind(Enum):
    C7S1 = "c7s1"
    DOWN = "d"
    RES = "R"
    UP = "u"
    DISC_C = "C"
    FINAL_CONV = "final"


_GENERATOR_KINDS = {LayerKind.C7S1, LayerKind.DOWN, LayerKind.RES, LayerKind.UP}
_DISCRIMINATOR_KINDS = {LayerKind.DISC_C, LayerKind.FINAL_CONV}


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    filters: int
    kernel: int
    stride: Fraction

    def __post_init__(self):
        if self.filters <= 0:
            raise ArchParseError(f"filter count must be positive, got {self.filters}")
        expected = {
            LayerKind.C7S1: (7, Fraction(1)),
            LayerKind.DOWN: (3, Fraction(2)),
            LayerKind.RES: (3, Fraction(1)),
            LayerKind.UP: (3, Fraction(1, 2)),
            LayerKind.FINAL_CONV: (4, Fraction(1)),
        }
        if self.kind in expected:
            kernel, stride = expected[self.kind]
            if self.kernel != kernel or self.stride != stride:
                raise ArchParseError(
                    f"{self.kind.value} layers are fixed at kernel {kernel}, stride {stride}"
                )
        elif self.kind is LayerKind.DISC_C:
            if self.kernel != 4 or self.stride not in (Fraction(1), Fraction(2)):
                raise ArchParseError("C layers use kernel 4 with stride 1 or 2")
        if self.kind is LayerKind.FINAL_CONV and self.filters != 1:
            raise ArchParseError("the final conv always has 1 filter")

    @classmethod
    def c7s1(cls, k: int) -> "LayerSpec":
        return cls(LayerKind.C7S1, k, 7, Fraction(1))

    @classmethod
    def down(cls, k: int) -> "LayerSpec":
        return cls(LayerKind.DOWN, k, 3, Fraction(2))

    @classmethod
    def res(cls, k: int) -> "LayerSpec":
        return cls(LayerKind.RES, k, 3, Fraction(1))

    @classmethod
    def up(cls, k: int) -> "LayerSpec":
        return cls(LayerKind.UP, k, 3, Fraction(1, 2))

    @classmethod
    def disc(cls, k: int, stride: int = 2) -> "LayerSpec":
        return cls(LayerKind.DISC_C, k, 4, Fraction(stride))

    @classmethod
    def final(cls) -> "LayerSpec":
        return cls(LayerKind.FINAL_CONV, 1, 4, Fraction(1))

    def token(self) -> str:
        if self.kind is LayerKind.C7S1:
            return f"c7s1-{self.filters}"
        if self.kind is LayerKind.FINAL_CONV:
            return "final"
        return f"{self.kind.value}{self.filters}"


@dataclass(frozen=True)
class ArchSpec:
    layers: tuple[LayerSpec, ...]
    role: Role

    def __post_init__(self):
        kinds = [layer.kind for layer in self.layers]
        if self.role is Role.GENERATOR:
            bad = [k for k in kinds if k not in _GENERATOR_KINDS]
            if bad:
                raise ArchParseError(f"generator spec cannot contain {bad[0].value} layers")
        else:
            bad = [k for k in kinds if k not in _DISCRIMINATOR_KINDS]
            if bad:
                raise ArchParseError(f"discriminator spec cannot contain {bad[0].value} layers")
            if kinds.count(LayerKind.FINAL_CONV) != 1 or kinds[-1] is not LayerKind.FINAL_CONV:
                raise ArchParseError("discriminator must end with exactly one final conv")

    def residual_count(self) -> int:
        return sum(1 for layer in self.layers if layer.kind is LayerKind.RES)


@dataclass(frozen=True)
class TensorShape:
    height: int
    width: int
    channels: int

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0 or self.channels <= 0:
            raise ArchShapeError(f"non-positive tensor shape {self}")

    def __str__(self) -> str:
        return f"{self.height}x{self.width}x{self.channels}"


@dataclass(frozen=True)
class ResolutionCheck:
    """Outcome of the residual-count/input-size rule; violations are results."""

    ok: bool
    residual_blocks: int
    input_size: int
    expected_blocks: int | None
    message: str


_TOKEN_RES = [
    (re.compile(r"^c7s1_(\d+)$"), lambda k: [LayerSpec.c7s1(k)]),
    (re.compile(r"^d(\d+)$"), lambda k: [LayerSpec.down(k)]),
    (re.compile(r"^u(\d+)$"), lambda k: [LayerSpec.up(k)]),
    (re.compile(r"^C(\d+)$"), lambda k: [LayerSpec.disc(k)]),
]
_RES_RE = re.compile(r"^R(\d+)(?:[x×](\d+))?$")


def _tokenize(text: str) -> list[str]:
    # Shield the internal hyphen of c7s1-K before splitting on separators.
    guarded = text.replace("c7s1-", "c7s1_")
    tokens = [t.strip() for t in re.split(r"[,\-]", guarded)]
    return [t for t in tokens if t]


def parse_arch(text: str, role: Role) -> ArchSpec:
    """Parse a notation string into an ordered layer list.

    Repeated residual blocks (RKxN) are expanded into individual layers. A
    discriminator without an explicit ``final`` token gets one appended.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ArchParseError("empty architecture string")
    layers: list[LayerSpec] = []
    for idx, token in enumerate(tokens, start=1):
        if token == "final":
            layers.append(LayerSpec.final())
            continue
        m = _RES_RE.match(token)
        if m:
            k, repeat = int(m.group(1)), int(m.group(2) or 1)
            if repeat < 1:
                raise ArchParseError(f"token {idx} ({token!r}): repeat count must be >= 1")
            layers.extend(LayerSpec.res(k) for _ in range(repeat))
            continue
        for pattern, build in _TOKEN_RES:
            m = pattern.match(token)
            if m:
                layers.extend(build(int(m.group(1))))
                break
        else:
            raise ArchParseError(f"token {idx} ({token!r}): unknown token")
    if role is Role.DISCRIMINATOR and (
        not layers or layers[-1].kind is not LayerKind.FINAL_CONV
    ):
        layers.append(LayerSpec.final())
    return ArchSpec(layers=tuple(layers), role=role)


def format_arch(spec: ArchSpec) -> str:
    """Canonical comma-separated rendering; parse(format(s)) == s."""
    return ",".join(layer.token() for layer in spec.layers)


def with_c512_stride(spec: ArchSpec, stride: int) -> ArchSpec:
    """Return a copy with the last C stage at the given stride.

    stride=1 reproduces the original PatchGAN (70x70 receptive field);
    stride=2 is the literal all-stride-2 reading of the notation.
    """
    if spec.role is not Role.DISCRIMINATOR:
        raise ArchParseError("stride variant applies to discriminator specs only")
    if stride not in (1, 2):
        raise ArchParseError("C-layer stride must be 1 or 2")
    last = max(
        (i for i, l in enumerate(spec.layers) if l.kind is LayerKind.DISC_C),
        default=None,
    )
    if last is None:
        raise ArchParseError("spec has no C layers")
    layers = list(spec.layers)
    layers[last] = replace(layers[last], stride=Fraction(stride))
    return ArchSpec(layers=tuple(layers), role=spec.role)


def _apply_layer(layer: LayerSpec, shape: TensorShape) -> TensorShape:
    h, w, ch = shape.height, shape.width, shape.channels
    kind = layer.kind
    if kind is LayerKind.C7S1:
        return TensorShape(h, w, layer.filters)
    if kind is LayerKind.RES:
        if ch != layer.filters:
            raise ArchShapeError(
                f"residual block expects {layer.filters} incoming channels, got {ch}"
            )
        return TensorShape(h, w, layer.filters)
    if kind is LayerKind.DOWN:
        return TensorShape(math.ceil(h / 2), math.ceil(w / 2), layer.filters)
    if kind is LayerKind.UP:
        return TensorShape(2 * h, 2 * w, layer.filters)
    if kind is LayerKind.DISC_C:
        if layer.stride == 2:
            return TensorShape(math.ceil(h / 2), math.ceil(w / 2), layer.filters)
        return TensorShape(h - 1, w - 1, layer.filters)
    # FINAL_CONV: pad-1 stride-1 kernel-4
    return TensorShape(h - 1, w - 1, 1)


def shape_trace(spec: ArchSpec, input_shape: TensorShape) -> list[TensorShape]:
    """Shapes after every layer, starting from the input shape."""
    shapes = [input_shape]
    for layer in spec.layers:
        try:
            shapes.append(_apply_layer(layer, shapes[-1]))
        except ArchShapeError as exc:
            raise ArchShapeError(f"layer {layer.token()}: {exc}") from None
    return shapes


def output_shape(spec: ArchSpec, input_shape: TensorShape) -> TensorShape:
    return shape_trace(spec, input_shape)[-1]


def _layer_params(layer: LayerSpec, in_channels: int) -> int:
    k2 = layer.kernel * layer.kernel
    if layer.kind is LayerKind.RES:
        return (in_channels * layer.filters + layer.filters * layer.filters) * k2 + 2 * layer.filters
    return in_channels * layer.filters * k2 + layer.filters


def param_trace(spec: ArchSpec, input_channels: int) -> list[int]:
    """Cumulative parameter count after each layer."""
    if input_channels <= 0:
        raise ArchShapeError("input_channels must be positive")
    totals = []
    total = 0
    ch = input_channels
    for layer in spec.layers:
        total += _layer_params(layer, ch)
        ch = layer.filters
        totals.append(total)
    return totals


def param_count(spec: ArchSpec, input_channels: int) -> int:
    """Total convolution weights + biases; normalization layers carry none."""
    trace = param_trace(spec, input_channels)
    return trace[-1] if trace else 0


def receptive_field(spec: ArchSpec) -> int:
    """Input-pixel footprint of one output unit, by the backward recurrence
    r <- r*s + (k - s) over layers in reverse."""
    if spec.role is not Role.DISCRIMINATOR:
        raise ArchShapeError("receptive field is defined for discriminator specs")
    r = Fraction(1)
    for layer in reversed(spec.layers):
        r = r * layer.stride + (layer.kernel - layer.stride)
    return int(r)


def validate_resolution(spec: ArchSpec, input_size: int) -> ResolutionCheck:
    """Check the residual-count rule: 6 blocks for 128 inputs, 9 for >= 256."""
    if spec.role is not Role.GENERATOR:
        raise ArchShapeError("resolution rule applies to generator specs")
    n = spec.residual_count()
    if input_size >= 256:
        expected = 9
    elif input_size == 128:
        expected = 6
    else:
        return ResolutionCheck(
            ok=False,
            residual_blocks=n,
            input_size=input_size,
            expected_blocks=None,
            message=f"no residual-block rule for input size {input_size} "
            f"(rules: 128 -> 6 blocks, >=256 -> 9 blocks)",
        )
    if n == expected:
        return ResolutionCheck(True, n, input_size, expected, "ok")
    return ResolutionCheck(
        ok=False,
        residual_blocks=n,
        input_size=input_size,
        expected_blocks=expected,
        message=f"expected {expected} residual blocks for input size {input_size}, found {n}",
    )
