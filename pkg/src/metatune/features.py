"""Static program features of a (preprocessed) C source file.

The analysis is token based: comments and preprocessor lines are dropped,
the rest is tokenized, and a brace-matching pass recovers file-scope
declarations and function bodies.  That is enough structure to count the
concurrency-relevant features without a full C parser, and it tolerates
the odd constructs that show up in preprocessed ``.i`` files.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import NamedTuple

log = logging.getLogger(__name__)

LOOP_SENTINEL = 1_000_000


class Token(NamedTuple):
    kind: str  # ident, keyword, number, string, char, op
    text: str
    pos: int
    line: int


KEYWORDS = frozenset("""
    auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Alignas _Alignof _Atomic _Bool _Complex _Generic _Imaginary _Noreturn
    _Static_assert _Thread_local __inline __inline__ __restrict __restrict__
    __volatile__ __const __signed__ __extension__ __attribute__ __asm__ asm
    __asm __typeof__ typeof __builtin_va_list __int128 __label__
""".split())

TYPE_KEYWORDS = frozenset("""
    char const double float int long short signed unsigned void volatile
    _Bool _Complex _Atomic __int128 __builtin_va_list __const __signed__
    restrict __restrict __restrict__ struct union enum
""".split())

_OPERATORS = sorted("""
    ... >>= <<= -> ++ -- << >> <= >= == != && || += -= *= /= %= &= ^= |= ##
    + - * / % < > = ! ~ & | ^ ? : ; , . ( ) [ ] { } #
""".split(), key=len, reverse=True)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+|\\\n)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?(?:\*/|\Z))
  | (?P<string>(?:[LuU]|u8)?"(?:\\.|[^"\\\n])*"?)
  | (?P<char>(?:[LuU]|u8)?'(?:\\.|[^'\\\n])*'?)
  | (?P<number>(?:\d|\.\d)(?:[eEpP][+-]|[\w.])*)
  | (?P<ident>[A-Za-z_$][\w$]*)
  | (?P<op>"""
    + "|".join(re.escape(op) for op in _OPERATORS)
    + r""")
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)

BINARY_OPERATORS = frozenset(
    "+ - * / % << >> & | ^ && || < > <= >= == !=".split()
)
_AMBIGUOUS = frozenset("+ - * &".split())


@dataclass(frozen=True)
class IntrinsicNames:
    """Function names recognized as concurrency / nondeterminism intrinsics."""

    thread_create: frozenset = frozenset({"pthread_create"})
    thread_join: frozenset = frozenset({"pthread_join"})
    mutex_lock: frozenset = frozenset({"pthread_mutex_lock", "pthread_mutex_trylock"})
    atomic_begin: frozenset = frozenset({"__VERIFIER_atomic_begin"})
    atomic_prefix: str = "__VERIFIER_atomic_"
    atomic_exclude: frozenset = frozenset({"__VERIFIER_atomic_end"})
    nondet_prefix: str = "__VERIFIER_nondet"

    def is_atomic_begin(self, name):
        if name in self.atomic_begin:
            return True
        return name.startswith(self.atomic_prefix) and name not in self.atomic_exclude


DEFAULT_INTRINSICS = IntrinsicNames()


@dataclass
class SourceUnit:
    path: str | None
    tokens: list[Token]
    file_scope_vars: frozenset[str]
    # name -> (index of "{", index of matching "}") into tokens
    function_defs: dict[str, tuple[int, int]]
    type_names: frozenset[str] = frozenset()
    degraded: bool = False
    warnings: list[str] = field(default_factory=list)

    def body_ranges(self):
        """Token index ranges (exclusive of the braces) that hold code."""
        if self.degraded:
            return [(0, len(self.tokens))]
        return sorted((lo + 1, hi) for lo, hi in self.function_defs.values())


@dataclass(frozen=True)
class ProgramFeatures:
    threads_created: int = 0
    threads_joined: int = 0
    mutex_locks: int = 0
    atomic_locks: int = 0
    global_var_accesses: int = 0
    global_fn_calls: int = 0
    binary_operators: int = 0
    nondet_variables: int = 0
    min_global_var_access: int = 0
    min_global_fn_calls: int = 0
    loop_iterations: int = 0

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def as_list(self):
        return [getattr(self, name) for name in self.names()]

    @classmethod
    def from_list(cls, values):
        values = list(values)
        if len(values) != len(cls.names()):
            raise ValueError(f"expected {len(cls.names())} feature values, got {len(values)}")
        return cls(*(int(v) for v in values))


# -- tokenizer ------------------------------------------------------------


def tokenize(text: str) -> list[Token]:
    """Split C source into tokens, dropping comments and preprocessor lines."""
    tokens = []
    line = 1
    at_line_start = True
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        kind = m.lastgroup
        value = m.group()
        if kind == "op" and value == "#" and at_line_start:
            # Preprocessor directive; honour backslash continuations.
            end = pos
            while True:
                nl = text.find("\n", end)
                if nl == -1:
                    end = n
                    break
                if text[nl - 1] == "\\" or text[nl - 2:nl] == "\\\r":
                    end = nl + 1
                    line += 1
                    continue
                end = nl
                break
            pos = end
            continue
        if kind == "nl":
            line += 1
            at_line_start = True
        elif kind == "ws":
            line += value.count("\n")
        elif kind == "comment":
            line += value.count("\n")
        elif kind != "other":
            if kind == "ident" and value in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, value, pos, line))
            at_line_start = False
        else:
            at_line_start = False
        pos = m.end()
    return tokens


# -- structural pass ------------------------------------------------------


def _match_brackets(tokens):
    """Map each opening bracket index to its closing index.

    Stray parentheses and square brackets are tolerated.  Returns
    ``(matches, ok)`` where ``ok`` is False when braces do not balance.
    """
    openers = {")": "(", "]": "[", "}": "{"}
    stack = []
    matches = {}
    ok = True
    for i, tok in enumerate(tokens):
        if tok.kind != "op":
            continue
        if tok.text in "([{":
            stack.append(i)
            continue
        want = openers.get(tok.text)
        if want is None:
            continue
        if want == "{":
            while stack and tokens[stack[-1]].text != "{":
                stack.pop()
            if not stack:
                ok = False
                continue
        else:
            j = len(stack) - 1
            while j >= 0 and tokens[stack[j]].text not in (want, "{"):
                j -= 1
            if j < 0 or tokens[stack[j]].text != want:
                continue
            del stack[j + 1:]
        matches[stack.pop()] = i
    if any(tokens[k].text == "{" for k in stack):
        ok = False
    return matches, ok


def _strip_attributes(seg, tokens, matches):
    """Drop __attribute__((...)), __asm__(...) and similar groups from a segment."""
    out = []
    i = 0
    while i < len(seg):
        k = seg[i]
        text = tokens[k].text
        if text in ("__attribute__", "__asm__", "asm", "__asm", "__declspec"):
            if i + 1 < len(seg) and tokens[seg[i + 1]].text == "(":
                close = matches.get(seg[i + 1])
                i += 1
                while i < len(seg) and (close is None or seg[i] <= close):
                    i += 1
                continue
        out.append(k)
        i += 1
    return out


def _items(seg, tokens, matches):
    """Group a token index list into single tokens and bracketed groups.

    Each item is ``(first, last)``; for a plain token ``first == last``.
    """
    items = []
    i = 0
    while i < len(seg):
        k = seg[i]
        close = matches.get(k) if tokens[k].text in "([{" else None
        if close is None:
            items.append((k, k))
            i += 1
            continue
        items.append((k, close))
        while i < len(seg) and seg[i] <= close:
            i += 1
    return items


def _declarator_names(seg, tokens, matches):
    """File-scope variable names declared by one top-level declaration."""
    if any(tokens[k].text == "typedef" for k in seg):
        return []
    declarators = [[]]
    in_init = False
    for item in _items(seg, tokens, matches):
        text = tokens[item[0]].text
        if item[0] == item[1] and text == ",":
            declarators.append([])
            in_init = False
        elif item[0] == item[1] and text == "=":
            in_init = True
        elif not in_init:
            declarators[-1].append(item)

    names = []
    for decl in declarators:
        name = None
        prototype = False
        for a, (first, last) in enumerate(decl):
            tok = tokens[first]
            if tok.text == "(" and first != last:
                inner = [k for k in range(first + 1, last)
                         if tokens[k].text not in ("*", "const", "volatile", "restrict")]
                if tokens[first + 1].text == "*" and inner and tokens[inner[0]].kind == "ident":
                    name = tokens[inner[0]].text  # (*fp)(...) or (*arr)[N]
                    break
                if a > 0 and tokens[decl[a - 1][0]].kind == "ident":
                    prototype = True
                    break
        if prototype:
            continue
        if name is None:
            for a in range(len(decl) - 1, -1, -1):
                first, last = decl[a]
                if first != last or tokens[first].kind != "ident":
                    continue
                prev = tokens[decl[a - 1][0]].text if a > 0 else ""
                if prev not in ("struct", "union", "enum"):
                    name = tokens[first].text
                break
        if name is not None:
            names.append(name)
    return names


def parse_source(text: str, path: str | None = None) -> SourceUnit:
    """Tokenize ``text`` and recover file-scope variables and function bodies.

    Unbalanced braces do not raise: the unit is marked ``degraded`` and the
    whole token stream is treated as code with no known globals.
    """
    tokens = tokenize(text)
    matches, ok = _match_brackets(tokens)
    if not ok:
        msg = f"{path or '<input>'}: unbalanced braces, falling back to whole-file scan"
        log.warning(msg)
        return SourceUnit(path, tokens, frozenset(), {}, _collect_type_names(tokens, []),
                          degraded=True, warnings=[msg])

    file_vars = []
    functions = {}
    typedef_segments = []
    seg = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind == "op" and tok.text == ";":
            clean = _strip_attributes(seg, tokens, matches)
            if any(tokens[k].text == "typedef" for k in clean):
                typedef_segments.append(clean)
            file_vars.extend(_declarator_names(clean, tokens, matches))
            seg = []
            i += 1
            continue
        if tok.kind == "op" and tok.text == "{":
            close = matches[i]
            clean = _strip_attributes(seg, tokens, matches)
            has_assign = any(tokens[k].text == "=" for k in clean)
            if clean and tokens[clean[-1]].text == ")" and not has_assign:
                name = _function_name(clean, tokens)
                if name is not None:
                    functions[name] = (i, close)
                    seg = []
                    i = close + 1
                    continue
            # aggregate body or initializer: keep it in the declaration
            seg.extend(range(i, close + 1))
            i = close + 1
            continue
        if tok.kind == "op" and tok.text in "([" and i in matches:
            seg.extend(range(i, matches[i] + 1))
            i = matches[i] + 1
            continue
        seg.append(i)
        i += 1

    return SourceUnit(
        path,
        tokens,
        frozenset(file_vars),
        functions,
        _collect_type_names(tokens, typedef_segments),
    )


def _function_name(seg, tokens):
    for a in range(len(seg) - 1):
        tok = tokens[seg[a]]
        if tok.kind == "ident" and tokens[seg[a + 1]].text == "(":
            return tok.text
    return None


def _collect_type_names(tokens, typedef_segments):
    names = set()
    for seg in typedef_segments:
        for k in reversed(seg):
            if tokens[k].kind == "ident":
                names.add(tokens[k].text)
                break
        # function-pointer typedefs: typedef int (*name)(...)
        for a in range(len(seg) - 2):
            if tokens[seg[a]].text == "(" and tokens[seg[a + 1]].text == "*" \
                    and tokens[seg[a + 2]].kind == "ident":
                names.add(tokens[seg[a + 2]].text)
    for a, tok in enumerate(tokens):
        if tok.kind == "ident" and tok.text.endswith("_t"):
            names.add(tok.text)
        if tok.text in ("struct", "union", "enum") and a + 1 < len(tokens) \
                and tokens[a + 1].kind == "ident":
            names.add(tokens[a + 1].text)
    return frozenset(names)


# -- feature counting -----------------------------------------------------


def _calls(unit):
    """Yield (token index, name) for every call site inside code ranges."""
    toks = unit.tokens
    for lo, hi in unit.body_ranges():
        for i in range(lo, hi - 1):
            tok = toks[i]
            if tok.kind == "ident" and toks[i + 1].text == "(":
                prev = toks[i - 1].text if i > 0 else ""
                if prev in (".", "->"):
                    continue
                yield i, tok.text


def _is_cast(unit, open_idx, close_idx):
    """True if the parenthesised tokens look like a type name."""
    toks = unit.tokens
    inner = toks[open_idx + 1:close_idx]
    if not inner:
        return False
    saw_type = False
    for tok in inner:
        if tok.text in TYPE_KEYWORDS or tok.text in unit.type_names:
            saw_type = True
        elif tok.text == "*" or tok.text in ("const", "volatile"):
            continue
        elif tok.kind == "ident" and saw_type:
            # "struct foo" tag already covered via type_names
            return False
        else:
            return False
    return saw_type


def _count_binary_operators(unit):
    toks = unit.tokens
    count = 0
    for lo, hi in unit.body_ranges():
        opens = []
        operand_end = False  # previous token finishes an operand
        last_close_was_cast = False
        for i in range(lo, hi):
            tok = toks[i]
            text = tok.text
            if tok.kind in ("number", "string", "char"):
                operand_end = True
            elif tok.kind == "ident":
                operand_end = text not in unit.type_names
            elif tok.kind == "keyword":
                operand_end = False
            elif text in ("(", "["):
                opens.append(i)
                operand_end = False
            elif text == ")":
                start = opens.pop() if opens else None
                last_close_was_cast = (
                    start is not None
                    and not (start > 0 and toks[start - 1].text in ("sizeof", "_Alignof"))
                    and _is_cast(unit, start, i)
                )
                operand_end = not last_close_was_cast
                continue
            elif text == "]":
                if opens:
                    opens.pop()
                operand_end = True
            elif text in ("++", "--"):
                pass  # postfix keeps operand_end, prefix keeps it False
            elif text in BINARY_OPERATORS:
                if text in _AMBIGUOUS:
                    if operand_end:
                        count += 1
                else:
                    count += 1
                operand_end = False
            else:
                operand_end = False
            last_close_was_cast = False
    return count


_INT_RE = re.compile(r"^(0[xX][0-9a-fA-F]+|0[0-7]*|[1-9]\d*)[uUlL]*$")


def _int_literal(toks, i):
    """Parse an optionally signed integer literal at ``i``; return (value, next_i)."""
    sign = 1
    if i < len(toks) and toks[i].text in ("-", "+"):
        sign = -1 if toks[i].text == "-" else 1
        i += 1
    if i >= len(toks) or toks[i].kind != "number":
        return None, i
    m = _INT_RE.match(toks[i].text)
    if not m:
        return None, i
    digits = m.group(1)
    if digits[:2] in ("0x", "0X"):
        value = int(digits, 16)
    elif digits.startswith("0"):
        value = int(digits, 8)
    else:
        value = int(digits)
    return sign * value, i + 1


def _trip_count(start, rel, bound, step):
    if step == 0:
        return None
    if rel == "<":
        if start >= bound:
            return 0
        return -(-(bound - start) // step) if step > 0 else None
    if rel == "<=":
        if start > bound:
            return 0
        return (bound - start) // step + 1 if step > 0 else None
    if rel == ">":
        if start <= bound:
            return 0
        return -(-(start - bound) // -step) if step < 0 else None
    if rel == ">=":
        if start < bound:
            return 0
        return (start - bound) // -step + 1 if step < 0 else None
    if rel == "!=":
        diff = bound - start
        if diff == 0:
            return 0
        if diff % step == 0 and diff // step > 0:
            return diff // step
        return None
    return None


def _for_trip_count(toks, open_idx, close_idx):
    """Trip count of ``for(i = C0; i REL C1; step)`` or None if not that shape."""
    parts = [[]]
    for k in range(open_idx + 1, close_idx):
        if toks[k].text == ";":
            parts.append([])
        else:
            parts[-1].append(k)
    if len(parts) != 3:
        return None
    init, cond, step = ([toks[k] for k in p] for p in parts)
    # init: [type...] i = C0
    eq = next((a for a, t in enumerate(init) if t.text == "="), None)
    if not eq or init[eq - 1].kind != "ident":
        return None
    if any(t.kind not in ("keyword", "ident") for t in init[:eq - 1]):
        return None
    var = init[eq - 1].text
    start, end = _int_literal(init, eq + 1)
    if start is None or end != len(init):
        return None
    # cond: i REL C1
    if len(cond) < 3 or cond[0].text != var or cond[1].text not in ("<", "<=", ">", ">=", "!="):
        return None
    bound, end = _int_literal(cond, 2)
    if bound is None or end != len(cond):
        return None
    rel = cond[1].text
    # step: i++ / ++i / i-- / --i / i += C / i -= C
    texts = [t.text for t in step]
    if texts in ([var, "++"], ["++", var]):
        delta = 1
    elif texts in ([var, "--"], ["--", var]):
        delta = -1
    elif len(step) >= 3 and texts[0] == var and texts[1] in ("+=", "-="):
        amount, end = _int_literal(step, 2)
        if amount is None or end != len(step):
            return None
        delta = amount if texts[1] == "+=" else -amount
    else:
        return None
    return _trip_count(start, rel, bound, delta)


def _statement_end(toks, i, matches, hi):
    """Index of the last token of the statement starting at ``i``."""
    if toks[i].text == "{":
        return matches.get(i, hi - 1)
    depth = 0
    k = i
    while k < hi:
        t = toks[k].text
        if t in ("(", "["):
            depth += 1
        elif t in (")", "]"):
            depth -= 1
        elif t == "{" and k in matches:
            k = matches[k]
        elif t == ";" and depth <= 0:
            return k
        k += 1
    return hi - 1


def _count_loop_iterations(unit):
    toks = unit.tokens
    matches, _ = _match_brackets(toks)
    total = 0
    for lo, hi in unit.body_ranges():
        do_whiles = set()
        for i in range(lo, hi):
            if toks[i].text == "do" and i + 1 < hi:
                end = _statement_end(toks, i + 1, matches, hi)
                if end + 1 < hi and toks[end + 1].text == "while":
                    do_whiles.add(end + 1)
        for i in range(lo, hi):
            text = toks[i].text
            if toks[i].kind != "keyword":
                continue
            if text == "for" and i + 1 < hi and toks[i + 1].text == "(" and i + 1 in matches:
                trips = _for_trip_count(toks, i + 1, matches[i + 1])
                total += LOOP_SENTINEL if trips is None else trips
            elif text == "while" and i not in do_whiles:
                total += LOOP_SENTINEL
            elif text == "do":
                total += LOOP_SENTINEL
    return total


def extract_features(unit: SourceUnit, names: IntrinsicNames = DEFAULT_INTRINSICS) -> ProgramFeatures:
    toks = unit.tokens
    calls = list(_calls(unit))
    call_counts = Counter(name for _, name in calls)

    def total(pred):
        return sum(c for name, c in call_counts.items() if pred(name))

    # global variable references, per variable and per function
    var_counts = Counter()
    touching = set()
    member = (".", "->")
    ranges = unit.function_defs.items() if not unit.degraded else []
    for fname, (lo, hi) in ranges:
        for i in range(lo + 1, hi):
            tok = toks[i]
            if tok.kind == "ident" and tok.text in unit.file_scope_vars \
                    and toks[i - 1].text not in member:
                var_counts[tok.text] += 1
                touching.add(fname)

    fn_counts = {name: call_counts[name] for name in touching if call_counts[name] > 0}

    return ProgramFeatures(
        threads_created=total(names.thread_create.__contains__),
        threads_joined=total(names.thread_join.__contains__),
        mutex_locks=total(names.mutex_lock.__contains__),
        atomic_locks=total(names.is_atomic_begin),
        global_var_accesses=sum(var_counts.values()),
        global_fn_calls=sum(fn_counts.values()),
        binary_operators=_count_binary_operators(unit),
        nondet_variables=total(lambda n: n.startswith(names.nondet_prefix)),
        min_global_var_access=min(var_counts.values(), default=0),
        min_global_fn_calls=min(fn_counts.values(), default=0),
        loop_iterations=_count_loop_iterations(unit),
    )


def features_of_file(path, names: IntrinsicNames = DEFAULT_INTRINSICS) -> ProgramFeatures:
    with open(path, encoding="utf-8", errors="replace") as fh:
        text = fh.read()
    return extract_features(parse_source(text, str(path)), names)
