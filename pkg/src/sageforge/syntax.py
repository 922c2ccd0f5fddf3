"""Concrete-syntax parsing, token taxonomy, and corpus statistics.

The grammar backend here is CPython's own tokenizer plus the ``ast`` module:
the lexical token stream supplies exact byte spans (comments included), the
AST supplies identifier roles. Both are grammar-driven and lossless for our
purposes; other language backends can be added behind ``parse``.

All spans are byte offsets into the UTF-8 encoding of the source. ``ast``
reports byte columns natively; lexer columns are character-based and get
converted through a per-line index.

Token taxonomy: identifier / keyword / operator / delimiter / literal, with
string literals and comments flagged as natural language (NL) and everything
else counted as programming language (PL). Assignment and augmented
assignment signs count as operators; pure punctuation counts as delimiters.
"""

from __future__ import annotations

import ast
import io
import keyword
import tokenize
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .tokenizer import Tokenizer

Span = tuple[int, int]

LANGUAGE_EXTENSIONS = {"python": (".py",)}


class GrammarError(ValueError):
    """Raised when no grammar backend exists for a requested language."""


def require_language(language: str) -> None:
    if language not in LANGUAGE_EXTENSIONS:
        raise GrammarError(f"no grammar available for language {language!r}")


class TokenCategory(Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    OPERATOR = "operator"
    DELIMITER = "delimiter"
    LITERAL = "literal"


class IdentifierRole(Enum):
    CLASS_NAME = "class_name"
    FUNCTION_NAME = "function_name"
    FUNCTION_ARG = "function_arg"
    VARIABLE = "variable"
    CALL = "call"


_DELIMITERS = {"(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "->"}
_NEUTRAL_TOKENS = {
    tokenize.NEWLINE,
    tokenize.NL,
    tokenize.INDENT,
    tokenize.DEDENT,
    tokenize.ENDMARKER,
}


class LineIndex:
    """Converts (line, column) coordinates to absolute byte offsets."""

    def __init__(self, source: str):
        self.lines = source.splitlines(keepends=True)
        offsets = [0]
        for line in self.lines:
            offsets.append(offsets[-1] + len(line.encode("utf-8")))
        self.line_byte_start = offsets
        self.n_bytes = offsets[-1]

    def from_byte_col(self, lineno: int, byte_col: int) -> int:
        """Absolute offset from a 1-based line and byte column (ast convention)."""
        return self.line_byte_start[lineno - 1] + byte_col

    def from_char_col(self, lineno: int, char_col: int) -> int:
        """Absolute offset from a 1-based line and character column (tokenize convention)."""
        if lineno - 1 >= len(self.lines):
            return self.n_bytes
        line = self.lines[lineno - 1]
        return self.line_byte_start[lineno - 1] + len(line[:char_col].encode("utf-8"))

    def ast_span(self, node: ast.AST) -> Span:
        return (
            self.from_byte_col(node.lineno, node.col_offset),
            self.from_byte_col(node.end_lineno, node.end_col_offset),
        )


@dataclass
class LexToken:
    type: int
    text: str
    span: Span


@dataclass
class Node:
    kind: str
    span: Span
    children: list["Node"] = field(default_factory=list)


@dataclass
class SyntaxTree:
    source: str
    root: Node
    tokens: list[LexToken]
    ast_root: Optional[ast.Module]
    error_spans: list[Span]
    line_index: LineIndex

    @property
    def has_errors(self) -> bool:
        return bool(self.error_spans)

    def iter_nodes(self) -> Iterable[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


def _lex(source: str, index: LineIndex) -> tuple[list[LexToken], list[Span]]:
    tokens: list[LexToken] = []
    errors: list[Span] = []
    last_end = 0
    try:
        for tok in tokenize.generate_tokens(io.StringIO(source).readline):
            start = index.from_char_col(tok.start[0], tok.start[1])
            end = index.from_char_col(tok.end[0], tok.end[1])
            tokens.append(LexToken(tok.type, tok.string, (start, end)))
            last_end = max(last_end, end)
    except (tokenize.TokenError, IndentationError, SyntaxError, ValueError):
        # Lexing stops at the failure; the remainder is one error region.
        if last_end < index.n_bytes:
            errors.append((last_end, index.n_bytes))
    return tokens, errors


def _build_node(node: ast.AST, index: LineIndex) -> Optional[Node]:
    if not hasattr(node, "lineno") or not hasattr(node, "end_lineno"):
        children: list[Node] = []
        for child in ast.iter_child_nodes(node):
            built = _build_node(child, index)
            if built is not None:
                children.append(built)
        if not children:
            return None
        span = (children[0].span[0], children[-1].span[1])
        return Node(type(node).__name__, span, children)
    span = index.ast_span(node)
    out = Node(type(node).__name__, span)
    for child in ast.iter_child_nodes(node):
        built = _build_node(child, index)
        if built is not None:
            out.children.append(built)
    return out


def parse(source: str, language: str = "python") -> SyntaxTree:
    """Parse source into a concrete tree; syntax errors become error nodes."""
    require_language(language)
    index = LineIndex(source)
    tokens, error_spans = _lex(source, index)
    root = Node("module", (0, index.n_bytes))
    ast_root: Optional[ast.Module] = None
    try:
        ast_root = ast.parse(source)
        for stmt in ast_root.body:
            built = _build_node(stmt, index)
            if built is not None:
                root.children.append(built)
    except (SyntaxError, ValueError):
        error_spans = error_spans + [(0, index.n_bytes)]
    for span in error_spans:
        root.children.append(Node("error", span))
    return SyntaxTree(source, root, tokens, ast_root, error_spans, index)


# -- identifier roles ---------------------------------------------------------


@dataclass
class IdentifierOccurrence:
    span: Span
    name: str
    role: IdentifierRole
    context: str  # class_def | func_def | param | name | attribute | kwarg | import | global | except


@dataclass
class UnitIndex:
    """Identifier occurrences and definition sets for one parsed unit."""

    occurrences: list[IdentifierOccurrence]
    defined_classes: set[str]
    defined_functions: set[str]
    defined_variables: set[str]
    defined_attributes: set[str]
    imported_names: set[str]

    def role_map(self) -> dict[Span, IdentifierRole]:
        return {occ.span: occ.role for occ in self.occurrences}


class _TokenFinder:
    def __init__(self, tokens: Sequence[LexToken]):
        self.names = [t for t in tokens if t.type == tokenize.NAME]
        self.starts = [t.span[0] for t in self.names]

    def find(self, lo: int, hi: int, text: str, last: bool = False) -> Optional[LexToken]:
        i = bisect_left(self.starts, lo)
        j = bisect_right(self.starts, hi)
        window = self.names[i:j]
        if last:
            window = reversed(window)
        for tok in window:
            if tok.text == text and tok.span[1] <= hi:
                return tok
        return None


class _IdentifierCollector(ast.NodeVisitor):
    def __init__(self, index: LineIndex, finder: _TokenFinder):
        self.index = index
        self.finder = finder
        self.occ: list[IdentifierOccurrence] = []
        self.classes: set[str] = set()
        self.functions: set[str] = set()
        self.variables: set[str] = set()
        self.attributes: set[str] = set()
        self.imports: set[str] = set()
        self._call_exprs: set[int] = set()

    def _add(self, span: Span, name: str, role: IdentifierRole, context: str) -> None:
        self.occ.append(IdentifierOccurrence(span, name, role, context))

    def _add_def_name(self, node: ast.AST, name: str, role: IdentifierRole, context: str) -> None:
        span = self.index.ast_span(node)
        tok = self.finder.find(span[0], span[1], name)
        if tok is not None:
            self._add(tok.span, name, role, context)

    def _mark_decorators(self, node) -> None:
        for dec in node.decorator_list:
            if isinstance(dec, (ast.Name, ast.Attribute)):
                self._call_exprs.add(id(dec))

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        self.classes.add(node.name)
        self._add_def_name(node, node.name, IdentifierRole.CLASS_NAME, "class_def")
        self._mark_decorators(node)
        self.generic_visit(node)

    def _visit_function(self, node) -> None:
        self.functions.add(node.name)
        self._add_def_name(node, node.name, IdentifierRole.FUNCTION_NAME, "func_def")
        self._mark_decorators(node)
        self.generic_visit(node)

    visit_FunctionDef = _visit_function
    visit_AsyncFunctionDef = _visit_function

    def visit_arg(self, node: ast.arg) -> None:
        self.variables.add(node.arg)
        start = self.index.from_byte_col(node.lineno, node.col_offset)
        self._add((start, start + len(node.arg.encode("utf-8"))), node.arg,
                  IdentifierRole.FUNCTION_ARG, "param")
        self.generic_visit(node)

    def visit_Name(self, node: ast.Name) -> None:
        role = IdentifierRole.CALL if id(node) in self._call_exprs else IdentifierRole.VARIABLE
        self._add(self.index.ast_span(node), node.id, role, "name")
        if isinstance(node.ctx, (ast.Store, ast.Del)):
            self.variables.add(node.id)

    def visit_Attribute(self, node: ast.Attribute) -> None:
        span = self.index.ast_span(node)
        tok = self.finder.find(span[0], span[1], node.attr, last=True)
        if tok is not None:
            role = IdentifierRole.CALL if id(node) in self._call_exprs else IdentifierRole.VARIABLE
            self._add(tok.span, node.attr, role, "attribute")
        if isinstance(node.ctx, (ast.Store, ast.Del)):
            self.attributes.add(node.attr)
        self.visit(node.value)

    def visit_Call(self, node: ast.Call) -> None:
        self._call_exprs.add(id(node.func))
        self.generic_visit(node)

    def visit_keyword(self, node: ast.keyword) -> None:
        if node.arg is not None and hasattr(node, "lineno"):
            span = self.index.ast_span(node)
            tok = self.finder.find(span[0], span[1], node.arg)
            if tok is not None:
                self._add(tok.span, node.arg, IdentifierRole.FUNCTION_ARG, "kwarg")
        self.visit(node.value)

    def _visit_import(self, node) -> None:
        for alias in node.names:
            bound = alias.asname or alias.name.split(".")[0]
            if bound == "*":
                continue
            self.imports.add(bound)
            span = self.index.ast_span(alias)
            tok = self.finder.find(span[0], span[1], bound, last=alias.asname is not None)
            if tok is not None:
                self._add(tok.span, bound, IdentifierRole.VARIABLE, "import")

    visit_Import = _visit_import
    visit_ImportFrom = _visit_import

    def _visit_scope_decl(self, node) -> None:
        span = self.index.ast_span(node)
        for name in node.names:
            tok = self.finder.find(span[0], span[1], name)
            if tok is not None:
                self._add(tok.span, name, IdentifierRole.VARIABLE, "global")

    visit_Global = _visit_scope_decl
    visit_Nonlocal = _visit_scope_decl

    def visit_ExceptHandler(self, node: ast.ExceptHandler) -> None:
        if node.name:
            self.variables.add(node.name)
            hi = node.body[0].lineno if node.body else node.end_lineno
            span_lo = self.index.from_byte_col(node.lineno, node.col_offset)
            span_hi = self.index.from_byte_col(hi, 0) if node.body else self.index.ast_span(node)[1]
            tok = self.finder.find(span_lo, span_hi, node.name)
            if tok is not None:
                self._add(tok.span, node.name, IdentifierRole.VARIABLE, "except")
        self.generic_visit(node)


def index_identifiers(tree: SyntaxTree) -> UnitIndex:
    """Collect identifier occurrences, roles, and definition sets for a unit."""
    collector = _IdentifierCollector(tree.line_index, _TokenFinder(tree.tokens))
    if tree.ast_root is not None:
        collector.visit(tree.ast_root)
    collector.occ.sort(key=lambda o: o.span)
    return UnitIndex(
        occurrences=collector.occ,
        defined_classes=collector.classes,
        defined_functions=collector.functions,
        defined_variables=collector.variables,
        defined_attributes=collector.attributes,
        imported_names=collector.imports,
    )


# -- token taxonomy -----------------------------------------------------------


@dataclass
class CategorizedToken:
    span: Span
    text: str
    category: TokenCategory
    nl_flag: bool
    identifier_role: Optional[IdentifierRole] = None
    is_comment: bool = False
    is_string: bool = False


def categorize_tokens(tree: SyntaxTree, source: str | None = None) -> list[CategorizedToken]:
    """Assign each non-whitespace lexical token exactly one category."""
    del source  # spans are resolved against tree.source already
    roles = index_identifiers(tree).role_map()
    out: list[CategorizedToken] = []
    prev_significant: Optional[int] = None
    for tok in tree.tokens:
        if tok.type in _NEUTRAL_TOKENS or not tok.text:
            if tok.type != tokenize.ENDMARKER:
                prev_significant = None  # line break: next '@' is a decorator
            continue
        cat: Optional[CategorizedToken] = None
        if tok.type == tokenize.NAME:
            if keyword.iskeyword(tok.text):
                cat = CategorizedToken(tok.span, tok.text, TokenCategory.KEYWORD, False)
            else:
                role = roles.get(tok.span, IdentifierRole.VARIABLE)
                cat = CategorizedToken(tok.span, tok.text, TokenCategory.IDENTIFIER, False,
                                       identifier_role=role)
        elif tok.type == tokenize.NUMBER:
            cat = CategorizedToken(tok.span, tok.text, TokenCategory.LITERAL, False)
        elif tok.type == tokenize.STRING:
            cat = CategorizedToken(tok.span, tok.text, TokenCategory.LITERAL, True,
                                   is_string=True)
        elif tok.type == tokenize.COMMENT:
            cat = CategorizedToken(tok.span, tok.text, TokenCategory.LITERAL, True,
                                   is_comment=True)
        elif tok.type == tokenize.OP:
            if tok.text == "...":
                cat = CategorizedToken(tok.span, tok.text, TokenCategory.LITERAL, False)
            elif tok.text == "@" and prev_significant is None:
                cat = CategorizedToken(tok.span, tok.text, TokenCategory.DELIMITER, False)
            elif tok.text in _DELIMITERS:
                cat = CategorizedToken(tok.span, tok.text, TokenCategory.DELIMITER, False)
            else:
                cat = CategorizedToken(tok.span, tok.text, TokenCategory.OPERATOR, False)
        elif tok.type == tokenize.ERRORTOKEN:
            if tok.text.strip():
                if tok.text.isidentifier():
                    cat = CategorizedToken(tok.span, tok.text, TokenCategory.IDENTIFIER, False,
                                           identifier_role=IdentifierRole.VARIABLE)
                else:
                    cat = CategorizedToken(tok.span, tok.text, TokenCategory.OPERATOR, False)
        if cat is not None:
            out.append(cat)
            prev_significant = tok.type
    return out


# -- distribution statistics ----------------------------------------------------


@dataclass
class DistributionReport:
    counts: dict[str, int]
    total: int
    pl_token_fraction: float
    nl_token_fraction: float
    identifier_fraction_of_pl: float
    identifier_fraction_of_total: float
    string_literal_fraction_of_literals: float

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "total": self.total,
            "pl_token_fraction": self.pl_token_fraction,
            "nl_token_fraction": self.nl_token_fraction,
            "identifier_fraction_of_pl": self.identifier_fraction_of_pl,
            "identifier_fraction_of_total": self.identifier_fraction_of_total,
            "string_literal_fraction_of_literals": self.string_literal_fraction_of_literals,
        }


def token_distribution(
    sources: Iterable[str], tokenizer: Tokenizer, language: str = "python"
) -> DistributionReport:
    """Subword-level NL/PL and category fractions over a corpus.

    Each subword inherits the category of the source token containing it;
    subwords covering inter-token whitespace are not counted.
    """
    require_language(language)
    counts = {c.value: 0 for c in TokenCategory}
    nl = 0
    identifier = 0
    string_literal = 0
    comment = 0
    for text in sources:
        tree = parse(text, language)
        cats = categorize_tokens(tree)
        spans = [c.span for c in cats if c.span[0] < c.span[1]]
        enc = tokenizer.encode_with_boundaries(text, spans)
        by_start = {c.span[0]: c for c in cats}
        starts = sorted(by_start)
        for _, (s, e) in enc:
            i = bisect_right(starts, s) - 1
            if i < 0:
                continue
            cat = by_start[starts[i]]
            if e > cat.span[1]:
                continue  # whitespace gap between source tokens
            counts[cat.category.value] += 1
            if cat.nl_flag:
                nl += 1
            if cat.category is TokenCategory.IDENTIFIER:
                identifier += 1
            if cat.is_string:
                string_literal += 1
            if cat.is_comment:
                comment += 1
    total = sum(counts.values())
    pl = total - nl
    literals = counts[TokenCategory.LITERAL.value]
    return DistributionReport(
        counts=counts,
        total=total,
        pl_token_fraction=pl / total if total else 0.0,
        nl_token_fraction=nl / total if total else 0.0,
        identifier_fraction_of_pl=identifier / pl if pl else 0.0,
        identifier_fraction_of_total=identifier / total if total else 0.0,
        string_literal_fraction_of_literals=string_literal / literals if literals else 0.0,
    )


def lexical_overlap(segment: Sequence, reference: Sequence) -> float:
    """Fraction of segment tokens (with multiplicity) present in reference."""
    if not segment:
        return 0.0
    ref = set(reference)
    return sum(1 for t in segment if t in ref) / len(segment)


def overlap_report(
    items: Iterable[tuple[str, str, Optional[str], Optional[str]]],
    tokenizer: Tokenizer,
) -> dict[str, float]:
    """Mean lexical overlap of (signature, body) against (docstring, summary).

    Items are (signature_text, body_text, docstring_or_None, summary_or_None).
    """
    sums = {k: 0.0 for k in
            ("signature_vs_docstring", "body_vs_docstring",
             "signature_vs_summary", "body_vs_summary")}
    counts = {k: 0 for k in sums}
    for signature, body, docstring, summary in items:
        sig_tokens = tokenizer.encode_ids(signature)
        body_tokens = tokenizer.encode_ids(body)
        for label, ref_text in (("docstring", docstring), ("summary", summary)):
            if not ref_text:
                continue
            ref = tokenizer.encode_ids(ref_text)
            sums[f"signature_vs_{label}"] += lexical_overlap(sig_tokens, ref)
            counts[f"signature_vs_{label}"] += 1
            sums[f"body_vs_{label}"] += lexical_overlap(body_tokens, ref)
            counts[f"body_vs_{label}"] += 1
    return {k: (sums[k] / counts[k] if counts[k] else 0.0) for k in sums}
