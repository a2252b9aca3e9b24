"""Segmentation network with an emergent-language channel (C++ core)."""

from ._sunet import (
    ConfigError,
    DegenerateOutcome,
    EpochReport,
    Model,
    NumericalError,
    ParseError,
    ShapeError,
    analyze,
    dsc,
    encode_position,
    fit_linear,
    fit_logistic,
    fit_multinomial,
    generate,
    gumbel_softmax,
    largest_component,
    mine_prefixes,
    parse_run_config,
    region_stats,
    write_dataset,
)

__all__ = [
    "ConfigError",
    "DegenerateOutcome",
    "EpochReport",
    "Model",
    "NumericalError",
    "ParseError",
    "ShapeError",
    "analyze",
    "dsc",
    "encode_position",
    "fit_linear",
    "fit_logistic",
    "fit_multinomial",
    "generate",
    "gumbel_softmax",
    "largest_component",
    "mine_prefixes",
    "parse_run_config",
    "region_stats",
    "write_dataset",
]
