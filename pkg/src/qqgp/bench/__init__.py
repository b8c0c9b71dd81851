"""Benchmark simulators, space-filling designs and the RRMSE experiment."""

from .design import Design, maximin_lhd, random_design
from .experiment import default_methods, run_experiment
from .functions import (
    BenchmarkSpec,
    beam,
    borehole,
    eval_beam,
    eval_borehole,
    eval_otl,
    eval_piston,
    get_spec,
    otl,
    piston,
)

__all__ = [
    "BenchmarkSpec", "Design", "beam", "borehole", "default_methods", "eval_beam",
    "eval_borehole", "eval_otl", "eval_piston", "get_spec", "maximin_lhd", "otl",
    "piston", "random_design", "run_experiment",
]
