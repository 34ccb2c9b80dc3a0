"""Source positions and diagnostics shared by the parser and the analyses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start: tuple[int, int]  # (line, col), 1-based
    end: tuple[int, int]

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("span end precedes start")

    def __str__(self):
        sl, sc = self.start
        el, ec = self.end
        return f"{self.file}:{sl}:{sc}-{el}:{ec}"


# Registry of diagnostic codes; docs/grammar.md lists the same table.
CODES = {
    "syntax": "malformed input text",
    "unguarded-rec": "recursion variable not guarded by a type constructor",
    "duplicate-label": "branch/select/variant label repeated",
    "empty-branches": "branch/select/variant with no alternatives",
    "unknown-name": "name not bound in the typing context",
    "type-mismatch": "type of a term differs from the expected type",
    "linearity": "linear name unused, reused, or split across parallel components",
    "linear-overlap": "linear name demanded by both sides of a parallel split",
    "capability-missing": "channel used without the required input/output capability",
    "variant-label-mismatch": "case labels differ from the scrutinee's variant type",
    "duality-mismatch": "session restriction endpoints have non-dual types",
    "arity-mismatch": "payload sequence length differs from the channel type",
    "label-not-offered": "selected label missing from the offered branches",
    "unmapped-name": "renaming function undefined on a free name",
    "invalid-renaming": "renaming function violates its freshness/identity conditions",
    "collision-on-linear": "renaming merges two linear names that are not co-endpoints",
    "not-splittable": "capability split applied to a non-both-capability type",
    "constructor-clash": "unification of types with different head constructors",
    "capability-clash": "unification of distinct capability atoms",
    "occurs-check": "recursive constraint with recursive types disabled",
    "not-decodable": "pi type outside the image of the session encoding",
    "not-projectable": "uninvolved role behaves differently across branches",
    "deadlock": "priority constraints form an unsatisfiable cycle",
    "free-linear-in-replication": "replicated process captures a free linear channel",
    "unserved-shared": "output to a shared channel with no replicated input in scope",
}


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: Optional[SourceSpan] = None

    def __post_init__(self):
        if self.severity not in ("error", "warning"):
            raise ValueError(f"bad severity {self.severity!r}")
        if self.code not in CODES:
            raise ValueError(f"unregistered diagnostic code {self.code!r}")

    def __str__(self):
        loc = f"{self.span}: " if self.span else ""
        return f"{loc}{self.severity}[{self.code}]: {self.message}"


def error(code: str, message: str, span: Optional[SourceSpan] = None) -> Diagnostic:
    return Diagnostic("error", code, message, span)
