"""Architecture descriptions and architecture-level shattering functions.

Only convolutional layers contribute: each conv neuron is a hyperplane in
the space of its receptive field, so a layer of ``k`` neurons with per-neuron
count ``f(n)`` contributes ``f(n) ** k`` and layers multiply. The products
overflow any float long before ``n`` gets interesting, so everything is kept
as a log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

from .errors import CompositionError, DomainError, ParseError
from .polyfit import QuadraticFit, evaluate

LAYER_KINDS = ("conv", "pool", "activation", "fully_connected")
_KEYWORDS = {"conv": "conv", "pool": "pool", "act": "activation", "fc": "fully_connected"}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    neurons: int | None = None
    filter_h: int | None = None
    filter_w: int | None = None
    pool_factor: int | None = None
    activation: str | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv", "fully_connected"):
            if not self.neurons or self.neurons < 1:
                raise ValueError(f"{self.kind} layer needs a positive neuron count")
        if self.kind == "conv":
            if not (self.filter_h and self.filter_w and self.filter_h > 0 and self.filter_w > 0):
                raise ValueError("conv layer needs positive filter dimensions")
        if self.kind == "pool" and (self.pool_factor is None or self.pool_factor < 2):
            raise ValueError("pool factor must be >= 2")

    @property
    def filter_key(self):
        return f"{self.filter_h}x{self.filter_w}"


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_h: int
    input_w: int
    layers: tuple
    input_channels: int = 1

    def __post_init__(self):
        if not any(layer.kind == "conv" for layer in self.layers):
            raise ParseError("architecture needs at least one conv layer")

    @property
    def conv_layers(self):
        """``(layer index, LayerSpec)`` for every conv layer, in order."""
        return [(i, layer) for i, layer in enumerate(self.layers) if layer.kind == "conv"]


def _parse_int(token, line, column, what):
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {token!r}", line, column) from None
    if value < 1:
        raise ParseError(f"{what} must be positive, got {value}", line, column)
    return value


def parse_architecture(text):
    """Parse the line-oriented architecture format.

    ::

        name AlexNet
        input 227 227
        conv 96 11x11
        act relu
        pool 2
        fc 4096

    ``#`` starts a comment. ``input`` takes an optional third value, the
    channel count, which only matters for channel-aware receptive fields.
    """
    name = None
    input_hw = None
    channels = 1
    layers = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = body.split()
        if not tokens:
            continue
        # 1-based columns of every token, for error messages
        cols = []
        pos = 0
        for tok in tokens:
            pos = body.index(tok, pos)
            cols.append(pos + 1)
            pos += len(tok)
        head, args = tokens[0].lower(), tokens[1:]

        if head == "name":
            if name is not None:
                raise ParseError("duplicate name line", lineno, cols[0])
            if not args:
                raise ParseError("name needs a value", lineno, cols[0] + len(tokens[0]))
            name = body[cols[1] - 1 :].strip()
            continue
        if head == "input":
            if input_hw is not None:
                raise ParseError("duplicate input line", lineno, cols[0])
            if len(args) not in (2, 3):
                raise ParseError("input expects <H> <W> [<channels>]", lineno, cols[0])
            h = _parse_int(args[0], lineno, cols[1], "input height")
            w = _parse_int(args[1], lineno, cols[2], "input width")
            if len(args) == 3:
                channels = _parse_int(args[2], lineno, cols[3], "input channels")
            input_hw = (h, w)
            continue
        if head not in _KEYWORDS:
            raise ParseError(f"unknown layer kind {tokens[0]!r}", lineno, cols[0])
        if input_hw is None:
            raise ParseError(
                f"{tokens[0]} layer before the input line; spatial dims are undefined",
                lineno,
                cols[0],
                layer=len(layers),
            )
        kind = _KEYWORDS[head]
        if kind == "conv":
            if len(args) != 2:
                raise ParseError("conv expects <neurons> <H>x<W>", lineno, cols[0])
            neurons = _parse_int(args[0], lineno, cols[1], "neuron count")
            parts = args[1].lower().split("x")
            if len(parts) != 2:
                raise ParseError(f"filter must look like 3x3, got {args[1]!r}", lineno, cols[2])
            fh = _parse_int(parts[0], lineno, cols[2], "filter height")
            fw = _parse_int(parts[1], lineno, cols[2] + len(parts[0]) + 1, "filter width")
            layers.append(LayerSpec("conv", neurons=neurons, filter_h=fh, filter_w=fw))
        elif kind == "pool":
            if len(args) != 1:
                raise ParseError("pool expects <factor>", lineno, cols[0])
            factor = _parse_int(args[0], lineno, cols[1], "pool factor")
            if factor < 2:
                raise ParseError("pool factor must be >= 2", lineno, cols[1], layer=len(layers))
            layers.append(LayerSpec("pool", pool_factor=factor))
        elif kind == "activation":
            if len(args) != 1:
                raise ParseError("act expects a function name", lineno, cols[0])
            layers.append(LayerSpec("activation", activation=args[0].lower()))
        else:
            if len(args) != 1:
                raise ParseError("fc expects <neurons>", lineno, cols[0])
            neurons = _parse_int(args[0], lineno, cols[1], "neuron count")
            layers.append(LayerSpec("fully_connected", neurons=neurons))

    if name is None:
        raise ParseError("missing name line", 1, 1)
    if input_hw is None:
        raise ParseError("missing input line", 1, 1)
    if not layers:
        raise ParseError("architecture has no layers", layer=0)
    if not any(layer.kind == "conv" for layer in layers):
        raise ParseError("architecture needs at least one conv layer", layer=0)
    return ArchitectureSpec(name, input_hw[0], input_hw[1], tuple(layers), channels)


def preset_names():
    return sorted(
        p.name for p in resources.files("shatterbound.presets").iterdir() if p.name.endswith(".arch")
    )


def preset_path(name):
    if not name.endswith(".arch"):
        name += ".arch"
    return resources.files("shatterbound.presets").joinpath(name)


def load_preset(name):
    return parse_architecture(preset_path(name).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ReceptiveField:
    layer: int
    input_dim: int
    spatial_h: int
    spatial_w: int


def receptive_dims(spec, use_channels=False):
    """Per conv layer, the dimension its neurons shatter in and the spatial size it sees.

    By default a ``b x c`` filter shatters in ``R^(b*c)`` whatever the channel
    depth. With ``use_channels`` the dimension is multiplied by the number of
    incoming channels (input channels, then the previous conv's neurons).
    """
    h, w = spec.input_h, spec.input_w
    channels = spec.input_channels
    out = []
    for i, layer in enumerate(spec.layers):
        if layer.kind == "conv":
            dim = layer.filter_h * layer.filter_w
            if use_channels:
                dim *= channels
            out.append(ReceptiveField(i, dim, h, w))
            channels = layer.neurons
        elif layer.kind == "pool":
            h = max(1, h // layer.pool_factor)
            w = max(1, w // layer.pool_factor)
    return out


@dataclass(frozen=True)
class Factor:
    fit: QuadraticFit
    exponent: int
    layer: int | None = None


@dataclass(frozen=True)
class LogShatterFunction:
    """``prod_i fit_i(n) ** exponent_i`` plus its ``lambda * n**d`` envelope.

    ``log_lambda`` is the sum of ``exponent * log(a2)``; the envelope degree is
    twice the total exponent since each factor is quadratic.
    """

    factors: tuple
    name: str = ""
    total_exponent_2n: int = field(init=False)
    log_lambda: float = field(init=False)

    def __post_init__(self):
        for f in self.factors:
            if f.exponent < 1:
                raise CompositionError(f"exponent must be positive, got {f.exponent}")
            if not f.fit.a2 > 0:
                raise CompositionError(
                    f"layer {f.layer}: leading coefficient {f.fit.a2} is not positive, "
                    "log envelope undefined"
                )
        object.__setattr__(self, "total_exponent_2n", 2 * sum(f.exponent for f in self.factors))
        object.__setattr__(
            self, "log_lambda", math.fsum(f.exponent * math.log(f.fit.a2) for f in self.factors)
        )

    @property
    def degree(self):
        return self.total_exponent_2n

    def min_safe_n(self):
        """Smallest n from which every factor stays positive."""
        return max(f.fit.positive_from() for f in self.factors)

    def __call__(self, n):
        return log_evaluate(self, n)


def compose_shattering(spec, per_layer_fits):
    """Build the log-shattering function from per-conv-layer fits.

    ``per_layer_fits`` maps a layer index (position in ``spec.layers``) to a
    :class:`QuadraticFit`. Fully-connected layers are ignored.
    """
    factors = []
    for i, layer in spec.conv_layers:
        if i not in per_layer_fits:
            raise CompositionError(f"no fit supplied for conv layer {i}")
        fit = per_layer_fits[i]
        if not fit.a2 > 0:
            raise CompositionError(
                f"layer {i}: leading coefficient {fit.a2} is not positive, log envelope undefined"
            )
        factors.append(Factor(fit, layer.neurons, i))
    return LogShatterFunction(tuple(factors), spec.name)


def fits_for(spec, library):
    """Resolve per-layer fits from a library keyed by ``convK`` (1-based) or ``HxW``.

    A ``convK`` entry wins over a filter-shape entry; ``"*"`` is a fallback for
    every conv layer.
    """
    out = {}
    for k, (i, layer) in enumerate(spec.conv_layers, start=1):
        for key in (f"conv{k}", layer.filter_key, "*"):
            if key in library:
                out[i] = library[key]
                break
        else:
            raise CompositionError(
                f"no fit for conv layer {k} ({layer.filter_key}); "
                f"library has {sorted(library)}"
            )
    return out


def log_evaluate(f, n):
    """``sum(exponent * log(fit(n)))``; the product itself is never formed."""
    total = []
    for factor in f.factors:
        value = evaluate(factor.fit, n)
        if not value > 0:
            raise DomainError(
                f"layer {factor.layer}: polynomial is {value:.6g} <= 0 at n={n}; "
                f"smallest safe n is {f.min_safe_n()}"
            )
        total.append(factor.exponent * math.log(value))
    return math.fsum(total)


def equivalent_single_layer(spec):
    count = sum(layer.neurons for _, layer in spec.conv_layers)
    note = (
        f"a single conv layer with {count} neurons has the same envelope degree; "
        "the shattering functions coincide only when every layer's leading constant is equal"
    )
    return count, note


@dataclass(frozen=True)
class Comparison:
    degree_a: int
    degree_b: int
    log_lambda_a: float
    log_lambda_b: float
    samples: tuple  # (n, log f(n) - log g(n))
    verdict: str
    asymptotic_log_ratio: float | None

    def to_dict(self):
        return {
            "degree_a": self.degree_a,
            "degree_b": self.degree_b,
            "log_lambda_a": self.log_lambda_a,
            "log_lambda_b": self.log_lambda_b,
            "log_difference": [{"n": n, "value": v} for n, v in self.samples],
            "verdict": self.verdict,
            "asymptotic_log_ratio": self.asymptotic_log_ratio,
        }


def _factor_multiset(f):
    return sorted((x.fit.coefficients, x.exponent) for x in f.factors)


def compare_architectures(f, g, n_values):
    """Compare two log-shattering functions over ``n_values``.

    Verdict is ``"distinct"`` when the envelope degrees differ, ``"identical"``
    when both are the same product of polynomials, else ``"same_degree"``; in
    the last case the log-ratio tends to ``log_lambda_a - log_lambda_b``.
    """
    samples = tuple((n, log_evaluate(f, n) - log_evaluate(g, n)) for n in n_values)
    if f.degree != g.degree:
        verdict, limit = "distinct", None
    elif _factor_multiset(f) == _factor_multiset(g):
        verdict, limit = "identical", 0.0
    else:
        verdict, limit = "same_degree", f.log_lambda - g.log_lambda
    return Comparison(f.degree, g.degree, f.log_lambda, g.log_lambda, samples, verdict, limit)
