"""Abstract syntax for the session calculus and the linear pi calculus.

Both calculi share values, parallel composition, inaction, replication,
conditionals and single-name restriction; the session calculus adds
prefixes on typed endpoints and the two-name session restriction, the pi
calculus adds polyadic prefixes, variant values and the case destructor.

Every node is an immutable dataclass, so terms and types can be hashed,
compared and shared freely.  Operations that need fresh names rename
apart first; nothing here mutates a term after construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional, Union

from .diag import SourceSpan


class UnguardedRecursion(Exception):
    """Recursive type whose variable is not under a type constructor."""


def _labels(pairs, what):
    pairs = tuple(pairs)
    if not pairs:
        raise ValueError(f"{what} needs at least one alternative")
    seen = set()
    for lbl, _ in pairs:
        if lbl in seen:
            raise ValueError(f"duplicate label {lbl!r} in {what}")
        seen.add(lbl)
    return tuple(sorted(pairs, key=lambda kv: kv[0]))


# ---------------------------------------------------------------------------
# Priorities (integer layer on linear channel types, used by the deadlock
# analysis; var=None means a constant).

@dataclass(frozen=True)
class Priority:
    var: Optional[str] = None
    offset: int = 0

    def __str__(self):
        if self.var is None:
            return str(self.offset)
        if self.offset == 0:
            return self.var
        return f"{self.var}{self.offset:+d}"


# ---------------------------------------------------------------------------
# Session types S and the surrounding type expressions T.

@dataclass(frozen=True)
class End:
    def __str__(self):
        return "end"


@dataclass(frozen=True)
class Send:
    payload: "TypeExpr"
    cont: "SessionType"

    def __str__(self):
        return f"!{_paren_ty(self.payload)}.{self.cont}"


@dataclass(frozen=True)
class Recv:
    payload: "TypeExpr"
    cont: "SessionType"

    def __str__(self):
        return f"?{_paren_ty(self.payload)}.{self.cont}"


@dataclass(frozen=True)
class Select:
    branches: tuple[tuple[str, "SessionType"], ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", _labels(self.branches, "select"))

    def __str__(self):
        alts = ", ".join(f"{l}: {s}" for l, s in self.branches)
        return "+{" + alts + "}"


@dataclass(frozen=True)
class Branch:
    branches: tuple[tuple[str, "SessionType"], ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", _labels(self.branches, "branch"))

    def __str__(self):
        alts = ", ".join(f"{l}: {s}" for l, s in self.branches)
        return "&{" + alts + "}"


@dataclass(frozen=True)
class RecType:
    var: str
    body: "SessionType"

    def __str__(self):
        return f"rec {self.var}.{self.body}"


@dataclass(frozen=True)
class TypeVar:
    name: str

    def __str__(self):
        return self.name


SessionType = Union[End, Send, Recv, Select, Branch, RecType, TypeVar]


@dataclass(frozen=True)
class SharedChan:
    payload: "TypeExpr"

    def __str__(self):
        return f"#{_paren_ty(self.payload)}"


@dataclass(frozen=True)
class UnitT:
    def __str__(self):
        return "Unit"


@dataclass(frozen=True)
class BaseT:
    name: str

    def __str__(self):
        return self.name


TypeExpr = Union[SessionType, SharedChan, UnitT, BaseT]


def _paren_ty(t) -> str:
    # sends/receives need parentheses when nested as payloads
    if isinstance(t, (Send, Recv, RecType)):
        return f"({t})"
    return str(t)


# ---------------------------------------------------------------------------
# Linear pi types t.  A linear channel carries two capability atoms; the
# four surface forms empty[], lin_i, lin_o, lin_io are sugar over them.

ABSENT = "o"   # the absent-capability atom
PRESENT = "*"  # the present-capability atom


@dataclass(frozen=True)
class LinChan:
    in_cap: str
    out_cap: str
    payload: tuple["PiType", ...] = ()
    priority: Optional[Priority] = None

    def __post_init__(self):
        if self.in_cap not in (ABSENT, PRESENT) or self.out_cap not in (ABSENT, PRESENT):
            raise ValueError("capability atoms are ABSENT or PRESENT")
        if self.in_cap == ABSENT and self.out_cap == ABSENT:
            # no capability: payload and priority are irrelevant, canonicalise
            object.__setattr__(self, "payload", ())
            object.__setattr__(self, "priority", None)
        else:
            object.__setattr__(self, "payload", tuple(self.payload))

    def __str__(self):
        if self.in_cap == ABSENT and self.out_cap == ABSENT:
            return "empty[]"
        tag = {(PRESENT, ABSENT): "lin_i", (ABSENT, PRESENT): "lin_o",
               (PRESENT, PRESENT): "lin_io"}[(self.in_cap, self.out_cap)]
        inner = ", ".join(str(t) for t in self.payload)
        pr = f"^{self.priority}" if self.priority is not None else ""
        return f"{tag}[{inner}]{pr}"


def no_cap() -> LinChan:
    return LinChan(ABSENT, ABSENT)


def lin_i(*payload: "PiType") -> LinChan:
    return LinChan(PRESENT, ABSENT, tuple(payload))


def lin_o(*payload: "PiType") -> LinChan:
    return LinChan(ABSENT, PRESENT, tuple(payload))


def lin_io(*payload: "PiType") -> LinChan:
    return LinChan(PRESENT, PRESENT, tuple(payload))


@dataclass(frozen=True)
class SharedPiChan:
    payload: tuple["PiType", ...]

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(self.payload))

    def __str__(self):
        return "#[" + ", ".join(str(t) for t in self.payload) + "]"


@dataclass(frozen=True)
class Variant:
    """Labelled disjoint union; each alternative carries a type sequence.

    The binary session encoding only ever produces singleton sequences, the
    multiparty one produces payload/continuation pairs.
    """

    branches: tuple[tuple[str, tuple["PiType", ...]], ...]

    def __post_init__(self):
        norm = tuple((l, tuple(ts)) for l, ts in self.branches)
        object.__setattr__(self, "branches", _labels(norm, "variant"))
        for _, ts in self.branches:
            if not ts:
                raise ValueError("variant alternative with empty type sequence")

    def __str__(self):
        def alt(l, ts):
            if len(ts) == 1:
                return f"{l}: {ts[0]}"
            return f"{l}: (" + ", ".join(str(t) for t in ts) + ")"
        return "<" + ", ".join(alt(l, ts) for l, ts in self.branches) + ">"


@dataclass(frozen=True)
class UnitPT:
    def __str__(self):
        return "Unit"


@dataclass(frozen=True)
class BasePT:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class RecPT:
    var: str
    body: "PiType"

    def __str__(self):
        return f"rec {self.var}.{self.body}"


@dataclass(frozen=True)
class PTVar:
    name: str

    def __str__(self):
        return self.name


PiType = Union[LinChan, SharedPiChan, Variant, UnitPT, BasePT, RecPT, PTVar]


# ---------------------------------------------------------------------------
# Values and expressions.  Variant values and the arithmetic/comparison
# operators only ever appear where the respective calculus allows them.

@dataclass(frozen=True)
class Name:
    id: str

    def __str__(self):
        return self.id


@dataclass(frozen=True)
class UnitVal:
    def __str__(self):
        return "*"


@dataclass(frozen=True)
class BaseVal:
    value: object  # int or bool

    def __str__(self):
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        return str(self.value)


@dataclass(frozen=True)
class VariantVal:
    label: str
    payload: "PiValue"

    def __str__(self):
        return f"{self.label}({self.payload})"


BINOPS = ("==", "!=", "<", "<=", "+", "-", "*")


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINOPS:
            raise ValueError(f"unknown operator {self.op!r}")

    def __str__(self):
        return f"{_paren_expr(self.left)} {self.op} {_paren_expr(self.right)}"


Value = Union[Name, UnitVal, BaseVal]
PiValue = Union[Name, UnitVal, BaseVal, VariantVal]
Expr = Union[Name, UnitVal, BaseVal, VariantVal, BinOp]


def _paren_expr(e) -> str:
    return f"({e})" if isinstance(e, BinOp) else str(e)


class NotGround(Exception):
    """Expression evaluation reached a free name."""


def eval_expr(e: Expr):
    """Evaluate a ground expression to a value term."""
    if isinstance(e, (UnitVal, BaseVal)):
        return e
    if isinstance(e, Name):
        raise NotGround(e.id)
    if isinstance(e, VariantVal):
        return VariantVal(e.label, eval_expr(e.payload))
    if isinstance(e, BinOp):
        lv, rv = eval_expr(e.left), eval_expr(e.right)
        if not (isinstance(lv, BaseVal) and isinstance(rv, BaseVal)):
            raise NotGround(str(e))
        a, b = lv.value, rv.value
        out = {"==": a == b, "!=": a != b, "<": a < b, "<=": a <= b,
               "+": a + b, "-": a - b, "*": a * b}[e.op]
        return BaseVal(out)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Processes.

@dataclass(frozen=True)
class Inaction:
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return "0"


@dataclass(frozen=True)
class Par:
    left: "Process"
    right: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"{_paren_proc(self.left)} | {_paren_proc(self.right)}"


@dataclass(frozen=True)
class Replicated:
    body: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"*{_paren_proc(self.body, tight=True)}"


@dataclass(frozen=True)
class Conditional:
    cond: Expr
    then_branch: "Process"
    else_branch: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return (f"if {self.cond} then {_paren_proc(self.then_branch, tight=True)} "
                f"else {_paren_proc(self.else_branch, tight=True)}")


@dataclass(frozen=True)
class ChanRes:
    """Single-name restriction (new x in P), shared by both calculi."""

    name: str
    body: "Process"
    annot: Optional[object] = None  # TypeExpr or PiType
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        ann = f" : {self.annot}" if self.annot is not None else ""
        return f"new {self.name}{ann} in {_paren_proc(self.body, tight=True)}"


@dataclass(frozen=True)
class SessionRes:
    """Two-endpoint session restriction (new x y in P)."""

    ep1: str
    ep2: str
    body: "Process"
    annot: Optional[SessionType] = None  # type of ep1; ep2 gets its complement
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.ep1 == self.ep2:
            raise ValueError("session restriction binds two distinct endpoints")

    def __str__(self):
        ann = f" : {self.annot}" if self.annot is not None else ""
        return f"new {self.ep1} {self.ep2}{ann} in {_paren_proc(self.body, tight=True)}"


@dataclass(frozen=True)
class Output:
    chan: str
    value: Expr
    cont: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"{self.chan}!<{self.value}>.{_paren_proc(self.cont, tight=True)}"


@dataclass(frozen=True)
class Input:
    chan: str
    binder: str
    cont: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"{self.chan}?({self.binder}).{_paren_proc(self.cont, tight=True)}"


@dataclass(frozen=True)
class Selection:
    chan: str
    label: str
    cont: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"{self.chan}+{self.label}.{_paren_proc(self.cont, tight=True)}"


@dataclass(frozen=True)
class Branching:
    chan: str
    branches: tuple[tuple[str, "Process"], ...]
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "branches", _labels(self.branches, "branching"))

    def __str__(self):
        alts = ", ".join(f"{l}: {p}" for l, p in self.branches)
        return f"{self.chan}&{{{alts}}}"


@dataclass(frozen=True)
class PiOutput:
    chan: str
    payload: tuple[Expr, ...]
    cont: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(self.payload))

    def __str__(self):
        inner = ", ".join(str(v) for v in self.payload)
        return f"{self.chan}!<{inner}>.{_paren_proc(self.cont, tight=True)}"


@dataclass(frozen=True)
class PiInput:
    chan: str
    binders: tuple[str, ...]
    cont: "Process"
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "binders", tuple(self.binders))
        if len(set(self.binders)) != len(self.binders):
            raise ValueError("input binders must be pairwise distinct")

    def __str__(self):
        inner = ", ".join(self.binders)
        return f"{self.chan}?({inner}).{_paren_proc(self.cont, tight=True)}"


@dataclass(frozen=True)
class Case:
    scrutinee: Expr
    branches: tuple[tuple[str, tuple[str, "Process"]], ...]
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "branches", _labels(self.branches, "case"))

    def __str__(self):
        alts = ", ".join(f"{l}({x}) > {p}" for l, (x, p) in self.branches)
        return f"case {self.scrutinee} of {{ {alts} }}"


Process = Union[Inaction, Par, Replicated, Conditional, ChanRes, SessionRes,
                Output, Input, Selection, Branching, PiOutput, PiInput, Case]

SESSION_ONLY = (Output, Input, Selection, Branching, SessionRes)
PI_ONLY = (PiOutput, PiInput, Case)


def _paren_proc(p, tight: bool = False) -> str:
    if isinstance(p, Par):
        return f"({p})"
    if tight and isinstance(p, (Conditional, ChanRes, SessionRes)):
        return f"({p})"
    return str(p)


# ---------------------------------------------------------------------------
# Names: free, bound, and all.

def expr_names(e: Expr) -> set[str]:
    if isinstance(e, Name):
        return {e.id}
    if isinstance(e, (UnitVal, BaseVal)):
        return set()
    if isinstance(e, VariantVal):
        return expr_names(e.payload)
    if isinstance(e, BinOp):
        return expr_names(e.left) | expr_names(e.right)
    raise TypeError(f"not an expression: {e!r}")


def free_names(p: Process) -> set[str]:
    """Names with a free occurrence in p (channel subjects, payloads, conditions)."""
    if isinstance(p, Inaction):
        return set()
    if isinstance(p, Par):
        return free_names(p.left) | free_names(p.right)
    if isinstance(p, Replicated):
        return free_names(p.body)
    if isinstance(p, Conditional):
        return expr_names(p.cond) | free_names(p.then_branch) | free_names(p.else_branch)
    if isinstance(p, ChanRes):
        return free_names(p.body) - {p.name}
    if isinstance(p, SessionRes):
        return free_names(p.body) - {p.ep1, p.ep2}
    if isinstance(p, Output):
        return {p.chan} | expr_names(p.value) | free_names(p.cont)
    if isinstance(p, Input):
        return {p.chan} | (free_names(p.cont) - {p.binder})
    if isinstance(p, Selection):
        return {p.chan} | free_names(p.cont)
    if isinstance(p, Branching):
        out = {p.chan}
        for _, q in p.branches:
            out |= free_names(q)
        return out
    if isinstance(p, PiOutput):
        out = {p.chan}
        for v in p.payload:
            out |= expr_names(v)
        return out | free_names(p.cont)
    if isinstance(p, PiInput):
        return {p.chan} | (free_names(p.cont) - set(p.binders))
    if isinstance(p, Case):
        out = expr_names(p.scrutinee)
        for _, (x, q) in p.branches:
            out |= free_names(q) - {x}
        return out
    raise TypeError(f"not a process: {p!r}")


def bound_names(p: Process) -> set[str]:
    out: set[str] = set()

    def walk(q):
        if isinstance(q, (Inaction,)):
            return
        if isinstance(q, Par):
            walk(q.left), walk(q.right)
        elif isinstance(q, Replicated):
            walk(q.body)
        elif isinstance(q, Conditional):
            walk(q.then_branch), walk(q.else_branch)
        elif isinstance(q, ChanRes):
            out.add(q.name)
            walk(q.body)
        elif isinstance(q, SessionRes):
            out.update((q.ep1, q.ep2))
            walk(q.body)
        elif isinstance(q, (Output, Selection)):
            walk(q.cont)
        elif isinstance(q, Input):
            out.add(q.binder)
            walk(q.cont)
        elif isinstance(q, Branching):
            for _, b in q.branches:
                walk(b)
        elif isinstance(q, PiOutput):
            walk(q.cont)
        elif isinstance(q, PiInput):
            out.update(q.binders)
            walk(q.cont)
        elif isinstance(q, Case):
            for _, (x, b) in q.branches:
                out.add(x)
                walk(b)
        else:
            raise TypeError(f"not a process: {q!r}")

    walk(p)
    return out


def all_names(p: Process) -> set[str]:
    """var(P): every name of P, free and bound."""
    return free_names(p) | bound_names(p)


class FreshNames:
    """Monotone fresh-name source that never emits a name from its avoid set."""

    def __init__(self, prefix: str = "c", avoid: Iterable[str] = ()):
        self.prefix = prefix
        self.avoid = set(avoid)
        self._n = 0

    def fresh(self) -> str:
        while True:
            cand = f"{self.prefix}{self._n}"
            self._n += 1
            if cand not in self.avoid:
                self.avoid.add(cand)
                return cand

    def reserve(self, names: Iterable[str]):
        self.avoid.update(names)


# ---------------------------------------------------------------------------
# Substitution.

def subst_expr(e: Expr, mapping: dict[str, Expr]) -> Expr:
    if isinstance(e, Name):
        return mapping.get(e.id, e)
    if isinstance(e, (UnitVal, BaseVal)):
        return e
    if isinstance(e, VariantVal):
        return VariantVal(e.label, subst_expr(e.payload, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, subst_expr(e.left, mapping), subst_expr(e.right, mapping))
    raise TypeError(f"not an expression: {e!r}")


def _subject(nm: str, mapping: dict[str, Expr]) -> str:
    got = mapping.get(nm)
    if got is None:
        return nm
    if isinstance(got, Name):
        return got.id
    raise ValueError(f"channel position {nm} substituted by non-name {got}")


def substitute_all(p: Process, mapping: dict[str, Expr]) -> Process:
    """Simultaneous capture-avoiding substitution of values for free names."""
    mapping = {x: v for x, v in mapping.items() if not (isinstance(v, Name) and v.id == x)}
    if not mapping:
        return p
    value_names: set[str] = set()
    for v in mapping.values():
        value_names |= expr_names(v)

    def freshen(binders: tuple[str, ...], body_parts, live: dict[str, Expr]):
        # drop shadowed entries, rename binders that would capture
        live = {x: v for x, v in live.items() if x not in binders}
        relevant = set().union(*(free_names(b) for b in body_parts)) if body_parts else set()
        live = {x: v for x, v in live.items() if x in relevant}
        capture = [b for b in binders if any(b in expr_names(v) for v in live.values())]
        if not capture:
            return binders, live, None
        avoid = value_names | set(binders)
        for b in body_parts:
            avoid |= all_names(b)
        sup = FreshNames(prefix="r", avoid=avoid)
        ren = {b: Name(sup.fresh()) for b in capture}
        new_binders = tuple(ren[b].id if b in ren else b for b in binders)
        return new_binders, live, ren

    def go(q: Process, live: dict[str, Expr]) -> Process:
        live = {x: v for x, v in live.items() if x in free_names(q)}
        if not live:
            return q
        if isinstance(q, Inaction):
            return q
        if isinstance(q, Par):
            return Par(go(q.left, live), go(q.right, live))
        if isinstance(q, Replicated):
            return Replicated(go(q.body, live))
        if isinstance(q, Conditional):
            return Conditional(subst_expr(q.cond, live), go(q.then_branch, live),
                               go(q.else_branch, live))
        if isinstance(q, ChanRes):
            (b,), inner, ren = freshen((q.name,), (q.body,), live)
            body = go(q.body, ren) if ren else q.body
            return ChanRes(b, go(body, inner), q.annot)
        if isinstance(q, SessionRes):
            (b1, b2), inner, ren = freshen((q.ep1, q.ep2), (q.body,), live)
            body = go(q.body, ren) if ren else q.body
            return SessionRes(b1, b2, go(body, inner), q.annot)
        if isinstance(q, Output):
            return Output(_subject(q.chan, live), subst_expr(q.value, live), go(q.cont, live))
        if isinstance(q, Input):
            subj = _subject(q.chan, live)
            (b,), inner, ren = freshen((q.binder,), (q.cont,), live)
            cont = go(q.cont, ren) if ren else q.cont
            return Input(subj, b, go(cont, inner))
        if isinstance(q, Selection):
            return Selection(_subject(q.chan, live), q.label, go(q.cont, live))
        if isinstance(q, Branching):
            subj = _subject(q.chan, live)
            return Branching(subj, tuple((l, go(b, live)) for l, b in q.branches))
        if isinstance(q, PiOutput):
            return PiOutput(_subject(q.chan, live),
                            tuple(subst_expr(v, live) for v in q.payload),
                            go(q.cont, live))
        if isinstance(q, PiInput):
            subj = _subject(q.chan, live)
            bs, inner, ren = freshen(q.binders, (q.cont,), live)
            cont = go(q.cont, ren) if ren else q.cont
            return PiInput(subj, bs, go(cont, inner))
        if isinstance(q, Case):
            scr = subst_expr(q.scrutinee, live)
            new = []
            for l, (x, b) in q.branches:
                (bx,), inner, ren = freshen((x,), (b,), live)
                body = go(b, ren) if ren else b
                new.append((l, (bx, go(body, inner))))
            return Case(scr, tuple(new))
        raise TypeError(f"not a process: {q!r}")

    return go(p, mapping)


def substitute(p: Process, v: Expr, x: str) -> Process:
    """P[v/x], capture-avoiding."""
    return substitute_all(p, {x: v})


# ---------------------------------------------------------------------------
# Alpha-equivalence via canonical renaming of bound names.

def rename_bound(p: Process, prefix: str = "†") -> Process:
    """Rename every binder to a positional name in traversal order."""
    counter = itertools.count()

    def nxt():
        return f"{prefix}{next(counter)}"

    def look(env, nm):
        return env.get(nm, nm)

    def go_expr(e, env):
        if isinstance(e, Name):
            return Name(look(env, e.id))
        if isinstance(e, (UnitVal, BaseVal)):
            return e
        if isinstance(e, VariantVal):
            return VariantVal(e.label, go_expr(e.payload, env))
        if isinstance(e, BinOp):
            return BinOp(e.op, go_expr(e.left, env), go_expr(e.right, env))
        raise TypeError(f"not an expression: {e!r}")

    def go(q, env):
        if isinstance(q, Inaction):
            return q
        if isinstance(q, Par):
            return Par(go(q.left, env), go(q.right, env))
        if isinstance(q, Replicated):
            return Replicated(go(q.body, env))
        if isinstance(q, Conditional):
            return Conditional(go_expr(q.cond, env), go(q.then_branch, env),
                               go(q.else_branch, env))
        if isinstance(q, ChanRes):
            b = nxt()
            return ChanRes(b, go(q.body, {**env, q.name: b}), q.annot)
        if isinstance(q, SessionRes):
            b1, b2 = nxt(), nxt()
            return SessionRes(b1, b2, go(q.body, {**env, q.ep1: b1, q.ep2: b2}), q.annot)
        if isinstance(q, Output):
            return Output(look(env, q.chan), go_expr(q.value, env), go(q.cont, env))
        if isinstance(q, Input):
            b = nxt()
            return Input(look(env, q.chan), b, go(q.cont, {**env, q.binder: b}))
        if isinstance(q, Selection):
            return Selection(look(env, q.chan), q.label, go(q.cont, env))
        if isinstance(q, Branching):
            return Branching(look(env, q.chan),
                             tuple((l, go(b, env)) for l, b in q.branches))
        if isinstance(q, PiOutput):
            return PiOutput(look(env, q.chan),
                            tuple(go_expr(v, env) for v in q.payload),
                            go(q.cont, env))
        if isinstance(q, PiInput):
            bs = tuple(nxt() for _ in q.binders)
            env2 = {**env, **dict(zip(q.binders, bs))}
            return PiInput(look(env, q.chan), bs, go(q.cont, env2))
        if isinstance(q, Case):
            scr = go_expr(q.scrutinee, env)
            new = []
            for l, (x, b) in q.branches:
                bx = nxt()
                new.append((l, (bx, go(b, {**env, x: bx}))))
            return Case(scr, tuple(new))
        raise TypeError(f"not a process: {q!r}")

    return go(p, {})


def alpha_equiv(p: Process, q: Process) -> bool:
    """Equality up to consistent renaming of bound names."""
    return rename_bound(p) == rename_bound(q)


# ---------------------------------------------------------------------------
# Structural congruence, decided by normalisation: parallel components are
# flattened into a canonically ordered list, inactions dropped, restrictions
# floated to the top of their parallel region (never through a prefix),
# unused restrictions garbage-collected, and bound names renamed
# positionally.  Two terms are congruent iff their normal forms are equal.

@dataclass(frozen=True)
class _Binder:
    kind: str  # "pair" | "single"
    names: tuple[str, ...]
    annot: Optional[object]


def _uniquify(p: Process) -> Process:
    return rename_bound(p, prefix="‡")


def _fingerprint(c: Process, marks: dict[str, str]) -> str:
    renamed = substitute_all(c, {n: Name(m) for n, m in marks.items() if n in free_names(c)})
    return str(rename_bound(renamed))


def _collect(p: Process, binders: list[_Binder], comps: list[Process], pi_mode: bool):
    if isinstance(p, Inaction):
        return
    if isinstance(p, Par):
        _collect(p.left, binders, comps, pi_mode)
        _collect(p.right, binders, comps, pi_mode)
    elif isinstance(p, ChanRes):
        binders.append(_Binder("single", (p.name,), p.annot))
        _collect(p.body, binders, comps, pi_mode)
    elif isinstance(p, SessionRes):
        binders.append(_Binder("pair", (p.ep1, p.ep2), p.annot))
        _collect(p.body, binders, comps, pi_mode)
    else:
        node = _normalize_node(p, pi_mode)
        if not isinstance(node, Inaction):
            comps.append(node)


def _normalize_node(p: Process, pi_mode: bool) -> Process:
    # normalise continuations of non-par nodes in place
    if isinstance(p, Replicated):
        body = _normalize_region(p.body, pi_mode)
        return Inaction() if isinstance(body, Inaction) and pi_mode else Replicated(body)
    if isinstance(p, Conditional):
        return Conditional(p.cond, _normalize_region(p.then_branch, pi_mode),
                           _normalize_region(p.else_branch, pi_mode))
    if isinstance(p, Output):
        return Output(p.chan, p.value, _normalize_region(p.cont, pi_mode))
    if isinstance(p, Input):
        return Input(p.chan, p.binder, _normalize_region(p.cont, pi_mode))
    if isinstance(p, Selection):
        return Selection(p.chan, p.label, _normalize_region(p.cont, pi_mode))
    if isinstance(p, Branching):
        return Branching(p.chan, tuple((l, _normalize_region(b, pi_mode))
                                       for l, b in p.branches))
    if isinstance(p, PiOutput):
        return PiOutput(p.chan, p.payload, _normalize_region(p.cont, pi_mode))
    if isinstance(p, PiInput):
        return PiInput(p.chan, p.binders, _normalize_region(p.cont, pi_mode))
    if isinstance(p, Case):
        return Case(p.scrutinee, tuple((l, (x, _normalize_region(b, pi_mode)))
                                       for l, (x, b) in p.branches))
    raise TypeError(f"unexpected component {p!r}")


def _normalize_region(p: Process, pi_mode: bool) -> Process:
    binders: list[_Binder] = []
    comps: list[Process] = []
    _collect(p, binders, comps, pi_mode)

    if pi_mode and comps:
        # absorb P next to an identical *P (P | *P == *P)
        rep_keys = {str(rename_bound(c.body)) for c in comps if isinstance(c, Replicated)}
        comps = [c for c in comps
                 if isinstance(c, Replicated) or str(rename_bound(c)) not in rep_keys]

    used = set().union(*(free_names(c) for c in comps)) if comps else set()
    binders = [b for b in binders if any(n in used for n in b.names)]

    # canonical component order: sort by a fingerprint in which the region's
    # binder names are first indistinct, then refined with their positions
    marks = {n: "‡b" for b in binders for n in b.names}
    for _ in range(3):
        decorated = sorted(range(len(comps)), key=lambda i: _fingerprint(comps[i], marks))
        order: dict[str, int] = {}
        for i in decorated:
            for n in sorted(free_names(comps[i]) & set(marks)):
                order.setdefault(n, len(order))
        new_marks = {n: f"‡b{order.get(n, 99)}" for n in marks}
        if new_marks == marks:
            break
        marks = new_marks
    comps = [comps[i] for i in decorated]

    # binder order: first use in the sorted component list
    def first_use(b: _Binder) -> tuple:
        for i, c in enumerate(comps):
            fn = free_names(c)
            if any(n in fn for n in b.names):
                return (i, min(b.names))
        return (len(comps), min(b.names))

    binders = sorted(binders, key=first_use)

    body: Process = Inaction()
    if comps:
        body = comps[-1]
        for c in reversed(comps[:-1]):
            body = Par(c, body)
    for b in reversed(binders):
        if b.kind == "single":
            body = ChanRes(b.names[0], body, b.annot)
        else:
            body = SessionRes(b.names[0], b.names[1], body, b.annot)
    return body


def normalize(p: Process, calculus: str = "session") -> Process:
    """Canonical representative of p's structural congruence class."""
    pi_mode = calculus == "pi"
    return rename_bound(_normalize_region(_uniquify(p), pi_mode))


def struct_congruent(p: Process, q: Process, calculus: str = "session") -> bool:
    return normalize(p, calculus) == normalize(q, calculus)


def canonical_key(p: Process, calculus: str = "session") -> str:
    return str(normalize(p, calculus))


# ---------------------------------------------------------------------------
# Recursive types: guardedness, substitution, unfolding.

def _ty_children(t):
    if isinstance(t, (Send, Recv)):
        return [t.payload, t.cont]
    if isinstance(t, (Select, Branch)):
        return [s for _, s in t.branches]
    if isinstance(t, RecType):
        return [t.body]
    if isinstance(t, SharedChan):
        return [t.payload]
    if isinstance(t, LinChan):
        return list(t.payload)
    if isinstance(t, SharedPiChan):
        return list(t.payload)
    if isinstance(t, Variant):
        return [u for _, ts in t.branches for u in ts]
    if isinstance(t, RecPT):
        return [t.body]
    return []


def free_type_vars(t) -> set[str]:
    if isinstance(t, (TypeVar, PTVar)):
        return {t.name}
    if isinstance(t, (RecType, RecPT)):
        return free_type_vars(t.body) - {t.var}
    out: set[str] = set()
    for c in _ty_children(t):
        out |= free_type_vars(c)
    return out


def is_guarded(t) -> bool:
    """Every recursion variable occurs under at least one proper constructor."""

    def go(u, pending: frozenset[str]) -> bool:
        if isinstance(u, (TypeVar, PTVar)):
            return u.name not in pending
        if isinstance(u, (RecType, RecPT)):
            return go(u.body, pending | {u.var})
        if isinstance(u, (Send, Recv, Select, Branch, SharedChan,
                          LinChan, SharedPiChan, Variant)):
            return all(go(c, frozenset()) for c in _ty_children(u))
        return True

    return go(t, frozenset())


def subst_type(t, var: str, repl):
    """t[repl / var] on type syntax (no capture: repl is closed in practice)."""
    if isinstance(t, (TypeVar, PTVar)):
        return repl if t.name == var else t
    if isinstance(t, (End, UnitT, BaseT, UnitPT, BasePT)):
        return t
    if isinstance(t, Send):
        return Send(subst_type(t.payload, var, repl), subst_type(t.cont, var, repl))
    if isinstance(t, Recv):
        return Recv(subst_type(t.payload, var, repl), subst_type(t.cont, var, repl))
    if isinstance(t, Select):
        return Select(tuple((l, subst_type(s, var, repl)) for l, s in t.branches))
    if isinstance(t, Branch):
        return Branch(tuple((l, subst_type(s, var, repl)) for l, s in t.branches))
    if isinstance(t, RecType):
        if t.var == var:
            return t
        return RecType(t.var, subst_type(t.body, var, repl))
    if isinstance(t, SharedChan):
        return SharedChan(subst_type(t.payload, var, repl))
    if isinstance(t, LinChan):
        return LinChan(t.in_cap, t.out_cap,
                       tuple(subst_type(u, var, repl) for u in t.payload), t.priority)
    if isinstance(t, SharedPiChan):
        return SharedPiChan(tuple(subst_type(u, var, repl) for u in t.payload))
    if isinstance(t, Variant):
        return Variant(tuple((l, tuple(subst_type(u, var, repl) for u in ts))
                             for l, ts in t.branches))
    if isinstance(t, RecPT):
        if t.var == var:
            return t
        return RecPT(t.var, subst_type(t.body, var, repl))
    raise TypeError(f"not a type: {t!r}")


def unfold_rec(t):
    """One-step unfolding body[rec X.body / X] of a recursive type."""
    if isinstance(t, RecType):
        if not is_guarded(t):
            raise UnguardedRecursion(str(t))
        return subst_type(t.body, t.var, t)
    if isinstance(t, RecPT):
        if not is_guarded(t):
            raise UnguardedRecursion(str(t))
        return subst_type(t.body, t.var, t)
    raise TypeError(f"unfold_rec on non-recursive type {t!r}")


def unroll(t):
    """Unfold top-level recursion until a non-rec constructor appears."""
    seen = 0
    while isinstance(t, (RecType, RecPT)):
        t = unfold_rec(t)
        seen += 1
        if seen > 64:
            raise UnguardedRecursion(str(t))
    return t


# ---------------------------------------------------------------------------
# Typing contexts.

def is_linear_type(t) -> bool:
    """Entries that impose use obligations (sessions, linear capabilities)."""
    if isinstance(t, (End, Send, Recv, Select, Branch, RecType, TypeVar)):
        return True
    if isinstance(t, LinChan):
        return t.in_cap == PRESENT or t.out_cap == PRESENT
    if isinstance(t, Variant):
        return any(is_linear_type(u) for _, ts in t.branches for u in ts)
    if isinstance(t, RecPT):
        return is_linear_type(t.body)
    return False


@dataclass(frozen=True)
class EnvEntry:
    type: object
    linear: bool


class TypeEnv:
    """Ordered name-to-type mapping with a linear/unrestricted flag per entry."""

    def __init__(self, entries: Optional[dict[str, EnvEntry]] = None):
        self._entries: dict[str, EnvEntry] = dict(entries or {})

    @classmethod
    def of(cls, **types) -> "TypeEnv":
        env = cls()
        for name, t in types.items():
            env = env.bind(name, t)
        return env

    def bind(self, name: str, t, linear: Optional[bool] = None) -> "TypeEnv":
        if name in self._entries:
            raise ValueError(f"duplicate context entry {name}")
        flag = is_linear_type(t) if linear is None else linear
        new = dict(self._entries)
        new[name] = EnvEntry(t, flag)
        return TypeEnv(new)

    def rebind(self, name: str, t, linear: Optional[bool] = None) -> "TypeEnv":
        flag = is_linear_type(t) if linear is None else linear
        new = dict(self._entries)
        new[name] = EnvEntry(t, flag)
        return TypeEnv(new)

    def drop(self, name: str) -> "TypeEnv":
        new = dict(self._entries)
        new.pop(name, None)
        return TypeEnv(new)

    def get(self, name: str) -> Optional[EnvEntry]:
        return self._entries.get(name)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def linear_names(self) -> list[str]:
        return [n for n, e in self._entries.items() if e.linear]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        return isinstance(other, TypeEnv) and self._entries == other._entries

    def __repr__(self):
        inner = ", ".join(f"{n}: {e.type}{'' if e.linear else ' (unr)'}"
                          for n, e in self._entries.items())
        return "{" + inner + "}"
