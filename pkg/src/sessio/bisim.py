"""Type bisimilarity, canonical class representatives and quotient steps.

The checker is a bounded, on-the-fly search over pairs of types.  Before a
pair is examined both sides are rewritten to a canonical representative
using only laws that preserve bisimilarity:

* ``rec z.T``            -> its unfolding
* ``q skip ; T``         -> ``T``             when Q(T) = q
* ``T ; q skip``         -> ``T``
* ``A ; B ; C``          -> ``A ; (B ; C)``   when Q(B) = Q(C)
* ``q *{l: T} ; U``      -> ``q *{l: T ; U}`` when some arm is enabled
* terminated ``T``       -> ``Q(T) skip``

Right association needs Q(B) = Q(C): ``(lin skip ; un skip) ; lin !Int``
cannot move while ``lin skip ; (un skip ; lin !Int)`` can.  Likewise the
distributive law fails for an ``un`` choice whose arms are all ``lin``:
the choice is stuck on the left but the tail can still move.

Long sequential stacks are split up to congruence (``A;C ~ B;D`` follows
from ``A ~ B`` and ``C ~ D``) when both heads are normed.  That shortcut
is only ever used to conclude bisimilarity; any failure found with it is
re-checked without it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

from .types import (
    LIN, UN, Base, Branch, BraL, EndpointType, In, InL, Out, OutL, Param,
    ParamL, PayloadType, Qualified, Qualifier, Rec, Select, SelL, Seq,
    Session, Skip, TypeLabel, alpha_key, check_well_formed, qual_leq,
    qualifier_of, show_type, skip, type_step, unfold,
)

DEFAULT_BUDGET = 10_000
DEFAULT_SEQ_DEPTH = 64
DEFAULT_REWRITE_BUDGET = 2_000


# -- results ----------------------------------------------------------------

@dataclass(frozen=True)
class Bisimilar:
    relation: frozenset = field(default_factory=frozenset, repr=False)

    def __str__(self) -> str:
        return "BISIMILAR"


@dataclass(frozen=True)
class NotBisimilar:
    trace: tuple[TypeLabel, ...]
    clause: str  # "qualifier-mismatch" | "missing-transition"

    def __str__(self) -> str:
        tr = " ".join(str(l) for l in self.trace) or "<root>"
        return f"NOT-BISIMILAR {tr}"


@dataclass(frozen=True)
class Unknown:
    explored: int
    bound: str  # "pairs" | "seq-depth" | "rewrite"

    def __str__(self) -> str:
        return f"UNKNOWN explored={self.explored} bound={self.bound}"


BisimResult = Union[Bisimilar, NotBisimilar, Unknown]


@dataclass(frozen=True)
class ClassRepr:
    type: EndpointType
    provenance: tuple[str, ...] = ()
    canonical: bool = True


# -- canonical representatives ---------------------------------------------

class _OutOfRewrites(Exception):
    pass


class _Rewriter:
    def __init__(self, budget: int, self_loop: bool):
        self.budget = budget
        self.self_loop = self_loop
        self.steps: list[str] = []

    def note(self, rule: str) -> None:
        self.steps.append(rule)
        if len(self.steps) > self.budget:
            raise _OutOfRewrites

    def terminated(self, t: EndpointType) -> bool:
        return not type_step(t, self.self_loop)

    def hnf(self, t: EndpointType) -> EndpointType:
        """Rewrite until the head is a prefix, skip, choice or parameter."""
        while True:
            match t:
                case Rec():
                    self.note("unfold")
                    t = unfold(t)
                    continue
                case Qualified(q, Branch() | Select()) if self.terminated(t):
                    self.note("stuck-to-skip")
                    return skip(q)
                case Seq(a, Qualified(_, Skip())):
                    self.note("skip-right")
                    t = a
                    continue
                case Seq(a, c):
                    a = self.hnf(a)
                    qc = qualifier_of(c)
                    match a:
                        case Qualified(q, Skip()) if q is qc:
                            self.note("skip-elim")
                            t = c
                            continue
                        case Qualified(q, Branch(arms)):
                            self.note("distribute")
                            return Qualified(q, Branch(tuple((l, Seq(x, c)) for l, x in arms)))
                        case Qualified(q, Select(arms)):
                            self.note("distribute")
                            return Qualified(q, Select(tuple((l, Seq(x, c)) for l, x in arms)))
                        case Seq(a1, a2) if qualifier_of(a2) is qc:
                            self.note("reassoc")
                            return Seq(a1, Seq(a2, c))
                    t = Seq(a, c)
            if not isinstance(t, Qualified) and self.terminated(t):
                self.note("stuck-to-skip")
                return skip(qualifier_of(t))
            return t

    def seqnorm(self, t: EndpointType) -> EndpointType:
        """Skip elimination and right association without unfolding."""
        match t:
            case Seq(a, c):
                a, c = self.seqnorm(a), self.seqnorm(c)
                if isinstance(c, Qualified) and isinstance(c.pre, Skip):
                    self.note("skip-right")
                    return a
                qc = qualifier_of(c)
                if isinstance(a, Qualified) and isinstance(a.pre, Skip) and a.qual is qc:
                    self.note("skip-elim")
                    return c
                if isinstance(a, Seq) and qualifier_of(a.right) is qc:
                    self.note("reassoc")
                    return Seq(a.left, self.seqnorm(Seq(a.right, c)))
                return Seq(a, c)
            case Qualified(q, Branch(arms)):
                return Qualified(q, Branch(self.arms(arms, self.seqnorm)))
            case Qualified(q, Select(arms)):
                return Qualified(q, Select(self.arms(arms, self.seqnorm)))
        return t

    def arms(self, arms, f):
        out = tuple(sorted(((l, f(x)) for l, x in arms), key=lambda a: a[0]))
        if tuple(l for l, _ in out) != tuple(l for l, _ in arms):
            self.note("sort-arms")
        return out

    def canonical(self, t: EndpointType) -> EndpointType:
        h = self.hnf(t)
        match h:
            case Qualified(q, Branch(arms)):
                return Qualified(q, Branch(self.arms(arms, self.canonical)))
            case Qualified(q, Select(arms)):
                return Qualified(q, Select(self.arms(arms, self.canonical)))
            case Seq(Seq(a1, a2), c):
                return Seq(Seq(a1, self.seqnorm(a2)), self.seqnorm(c))
            case Seq(a, c):
                return Seq(a, self.seqnorm(c))
        return h


@lru_cache(maxsize=65536)
def canonical_repr(t: EndpointType, budget: int = DEFAULT_REWRITE_BUDGET,
                   self_loop: bool = False) -> ClassRepr:
    """A bisimilar representative of ``t``'s class.

    On rewrite-budget exhaustion the input comes back flagged non-canonical.
    """
    rw = _Rewriter(budget, self_loop)
    try:
        out = rw.canonical(t)
    except _OutOfRewrites:
        return ClassRepr(t, tuple(rw.steps), canonical=False)
    return ClassRepr(out, tuple(rw.steps), canonical=True)


@lru_cache(maxsize=65536)
def light_form(t: EndpointType) -> EndpointType:
    """Skip elimination and right association only; recursion stays folded."""
    rw = _Rewriter(DEFAULT_REWRITE_BUDGET, False)
    try:
        return rw.seqnorm(t)
    except _OutOfRewrites:
        return t


def quotient_step(t: EndpointType, self_loop: bool = False) -> tuple[tuple[TypeLabel, ClassRepr], ...]:
    """Transitions between classes: step the representative, canonicalise successors."""
    rep = canonical_repr(t, self_loop=self_loop).type
    return tuple((lab, canonical_repr(s, self_loop=self_loop)) for lab, s in type_step(rep, self_loop))


# -- the search -------------------------------------------------------------

def _chain(t: EndpointType) -> list[EndpointType]:
    out = []
    while isinstance(t, Seq):
        out.append(t.left)
        t = t.right
    out.append(t)
    return out


def _rebuild(chain: list[EndpointType]) -> EndpointType:
    t = chain[-1]
    for x in reversed(chain[:-1]):
        t = Seq(x, t)
    return t


def seq_depth(t: EndpointType) -> int:
    if isinstance(t, Seq):
        return 1 + max(seq_depth(t.left), seq_depth(t.right))
    return 0


@lru_cache(maxsize=65536)
def is_normed(t: EndpointType, self_loop: bool = False, bound: int = 256) -> bool:
    """Whether some run reaches a terminated type (searched up to ``bound`` states)."""
    seen = {alpha_key(t)}
    todo = deque([t])
    while todo and len(seen) <= bound:
        x = todo.popleft()
        steps = type_step(x, self_loop)
        if not steps:
            return True
        for _, y in steps:
            if seq_depth(y) > DEFAULT_SEQ_DEPTH:
                # the stack keeps growing along this path; give up on it
                continue
            y = canonical_repr(y, self_loop=self_loop).type
            k = alpha_key(y)
            if k not in seen:
                seen.add(k)
                todo.append(y)
    return False


class _Exhausted(Exception):
    def __init__(self, bound: str):
        self.bound = bound


class _Search:
    def __init__(self, budget: int, depth: int, self_loop: bool, canonicalise: bool):
        self.budget = budget
        self.depth = depth
        self.self_loop = self_loop
        self.canonicalise = canonicalise
        self.explored = 0
        self.payload_memo: dict[tuple, bool] = {}

    def norm(self, t: EndpointType) -> EndpointType:
        if not self.canonicalise:
            return t
        rep = canonical_repr(t, self_loop=self.self_loop)
        if not rep.canonical:
            raise _Exhausted("rewrite")
        return rep.type

    def light(self, t: EndpointType) -> EndpointType:
        return light_form(t) if self.canonicalise else t

    def payload_equiv(self, p1: PayloadType, p2: PayloadType) -> bool:
        if p1 == p2:
            return True
        match p1, p2:
            case Base(a), Base(b):
                return a == b
            case Session(a1, b1), Session(a2, b2):
                return self.payload_equiv(a1, a2) and self.payload_equiv(b1, b2)
            case (Base() | Session()), _:
                return False
            case _, (Base() | Session()):
                return False
        key = (alpha_key(p1), alpha_key(p2))
        if key in self.payload_memo:
            return self.payload_memo[key]
        self.payload_memo[key] = True  # coinductive assumption
        res = self.decide(p1, p2, decompose=True)
        if isinstance(res, NotBisimilar):
            self.payload_memo[key] = False
            return False
        return True

    def labels_match(self, a: TypeLabel, b: TypeLabel) -> bool:
        match a, b:
            case SelL(x), SelL(y):
                return x == y
            case BraL(x), BraL(y):
                return x == y
            case OutL(p), OutL(q):
                return self.payload_equiv(p, q)
            case InL(p), InL(q):
                return self.payload_equiv(p, q)
            case ParamL(n1, d1), ParamL(n2, d2):
                return n1 == n2 and d1 == d2
        return False

    def decide(self, t1: EndpointType, t2: EndpointType, decompose: bool) -> BisimResult:
        res, used = self.run(t1, t2, decompose)
        if isinstance(res, NotBisimilar) and used:
            res, _ = self.run(t1, t2, False)
        return res

    def run(self, t1: EndpointType, t2: EndpointType, decompose: bool):
        relation: set = set()
        seen: set = set()
        queue = deque([(t1, t2, ())])
        used_decomposition = False
        while queue:
            a, b, trace = queue.popleft()
            a, b = self.light(a), self.light(b)
            key = (alpha_key(a), alpha_key(b))
            if key in seen:
                continue
            seen.add(key)
            relation.add((a, b))
            if key[0] == key[1]:
                continue
            self.explored += 1
            if self.explored > self.budget:
                raise _Exhausted("pairs")
            if max(seq_depth(a), seq_depth(b)) > self.depth:
                raise _Exhausted("seq-depth")
            if decompose:
                ca, cb = _chain(a), _chain(b)
                if (len(ca) >= 2 and len(cb) >= 2
                        and is_normed(ca[0], self.self_loop) and is_normed(cb[0], self.self_loop)):
                    used_decomposition = True
                    queue.append((ca[0], cb[0], trace))
                    queue.append((_rebuild(ca[1:]), _rebuild(cb[1:]), trace))
                    continue
            a, b = self.norm(a), self.norm(b)
            if alpha_key(a) == alpha_key(b):
                continue
            if qualifier_of(a) is not qualifier_of(b):
                return NotBisimilar(trace, "qualifier-mismatch"), used_decomposition
            sa, sb = type_step(a, self.self_loop), type_step(b, self.self_loop)
            matched_b = [False] * len(sb)
            for lab, a2 in sa:
                for j, (lab2, b2) in enumerate(sb):
                    if self.labels_match(lab, lab2):
                        matched_b[j] = True
                        queue.append((a2, b2, trace + (lab,)))
                        break
                else:
                    return NotBisimilar(trace + (lab,), "missing-transition"), used_decomposition
            for j, ok in enumerate(matched_b):
                if ok:
                    continue
                lab2 = sb[j][0]
                if not any(self.labels_match(lab, lab2) for lab, _ in sa):
                    return NotBisimilar(trace + (lab2,), "missing-transition"), used_decomposition
        return Bisimilar(frozenset(relation)), used_decomposition


def _validate(t: EndpointType) -> None:
    check_well_formed(t)


def bisimilar(t1: EndpointType, t2: EndpointType, budget: int = DEFAULT_BUDGET,
              seq_depth_bound: int = DEFAULT_SEQ_DEPTH, self_loop: bool = False,
              canonicalise: bool = True, decompose: bool = True) -> BisimResult:
    """Decide ``t1 ~ t2`` within the given budgets.

    ``canonicalise=False`` explores raw ``type_step`` successors only; on
    recursion-free types this is a plain finite-state check and serves as an
    oracle for the canonicalising search.
    """
    _validate(t1)
    _validate(t2)
    search = _Search(budget, seq_depth_bound, self_loop, canonicalise)
    try:
        res = search.decide(t1, t2, decompose)
    except _Exhausted as e:
        return Unknown(search.explored, e.bound)
    if isinstance(res, NotBisimilar) and not replay_failure(t1, t2, res, self_loop):
        # a refutation that does not replay is treated as inconclusive
        return Unknown(search.explored, "replay")
    return res


def _match_step(t: EndpointType, lab: TypeLabel, self_loop: bool, search: _Search) -> Optional[EndpointType]:
    for l2, t2 in type_step(t, self_loop):
        if search.labels_match(lab, l2):
            return t2
    return None


def replay_failure(t1: EndpointType, t2: EndpointType, res: NotBisimilar,
                   self_loop: bool = False) -> bool:
    """Follow ``res.trace`` from both roots and confirm the claimed clause fails."""
    search = _Search(DEFAULT_BUDGET, DEFAULT_SEQ_DEPTH, self_loop, True)
    a, b = t1, t2
    trace = res.trace if res.clause == "qualifier-mismatch" else res.trace[:-1]
    for lab in trace:
        a2 = _match_step(a, lab, self_loop, search)
        b2 = _match_step(b, lab, self_loop, search)
        if a2 is None or b2 is None:
            return False
        a, b = a2, b2
    if res.clause == "qualifier-mismatch":
        return qualifier_of(a) is not qualifier_of(b)
    last = res.trace[-1]
    return (_match_step(a, last, self_loop, search) is None) != (_match_step(b, last, self_loop, search) is None)


def labels_match(a: TypeLabel, b: TypeLabel, budget: int = DEFAULT_BUDGET) -> bool:
    """Label equality with payload types compared up to bisimilarity."""
    return _Search(budget, DEFAULT_SEQ_DEPTH, False, True).labels_match(a, b)


def equivalent(p1: PayloadType, p2: PayloadType, budget: int = DEFAULT_BUDGET,
               self_loop: bool = False) -> BisimResult:
    """Payload equivalence: base names, componentwise pairs, bisimilar endpoints."""
    match p1, p2:
        case Base(a), Base(b):
            return Bisimilar() if a == b else NotBisimilar((), "missing-transition")
        case Session(a1, b1), Session(a2, b2):
            r = bisimilar(a1, a2, budget, self_loop=self_loop)
            return r if not isinstance(r, Bisimilar) else bisimilar(b1, b2, budget, self_loop=self_loop)
        case (Base() | Session()), _:
            return NotBisimilar((), "missing-transition")
        case _, (Base() | Session()):
            return NotBisimilar((), "missing-transition")
    return bisimilar(p1, p2, budget, self_loop=self_loop)


def distributive_pair(q: Qualifier, star: str, arms, tail: EndpointType) -> tuple[EndpointType, EndpointType]:
    """``(q *{l: T} ; U, q *{l: T ; U})`` for ``star`` in ``{"+", "&"}``."""
    ctor = Select if star == "+" else Branch
    arms = tuple(arms)
    left = Seq(Qualified(q, ctor(arms)), tail)
    right = Qualified(q, ctor(tuple((l, Seq(t, tail)) for l, t in arms)))
    return left, right


def show_relation(rel: Bisimilar) -> str:
    """Line-oriented dump of a witness relation."""
    lines = sorted(f"{show_type(a)}  ~  {show_type(b)}" for a, b in rel.relation)
    return "\n".join(lines)
