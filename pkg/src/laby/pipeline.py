"""Compilation driver: source text to executable dataflow graph."""

from dataclasses import dataclass

from .cfg import build_cfg
from .dataflow import build_dataflow
from .lift import lift
from .normalize import normalize
from .parser import parse
from .ssa import check_ssa, to_ssa
from .typecheck import typecheck


@dataclass
class CompiledProgram:
    source: str
    typed: object          # typechecked, pre-normalization AST
    normalized: object
    cfg: object
    ssa: object
    lifted: object
    graph: object
    workers: int
    filename: str


def compile_source(src, workers=1, filename="<input>"):
    program = parse(src, filename)
    typed = typecheck(program, filename)
    normalized = normalize(typed)
    cfg = build_cfg(normalized)
    ssa = to_ssa(normalized, cfg)
    check_ssa(ssa)
    lifted = lift(ssa)
    graph = build_dataflow(lifted, workers)
    return CompiledProgram(source=src, typed=typed, normalized=normalized,
                           cfg=cfg, ssa=ssa, lifted=lifted, graph=graph,
                           workers=workers, filename=filename)
