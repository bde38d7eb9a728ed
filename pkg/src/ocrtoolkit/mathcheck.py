"""Static checks for LaTeX math spans.

``validate_math`` approximates "renders with KaTeX" without a renderer: braces
must balance, environments must nest with matching names, ``\\left``/``\\right``
must pair up, every control word must be on an allowlist, and the span must not
contain raw HTML tags.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ConfigError

_HTML_TAG = re.compile(r"</?[A-Za-z][A-Za-z0-9]*(?:\s[^<>]*)?/?>")
_ENV_NAME = re.compile(r"\s*\{([A-Za-z]+\*?)\}")

STRUCTURAL_ISSUES = (
    "unbalanced brace",
    "environment mismatch",
    "unclosed environment",
    "unmatched \\end",
    "unmatched \\left",
    "unmatched \\right",
    "malformed environment",
)

_GREEK = """
alpha beta gamma delta epsilon varepsilon zeta eta theta vartheta iota kappa varkappa
lambda mu nu xi omicron pi varpi rho varrho sigma varsigma tau upsilon phi varphi chi
psi omega Gamma Delta Theta Lambda Xi Pi Sigma Upsilon Phi Psi Omega digamma
varGamma varDelta varTheta varLambda varXi varPi varSigma varUpsilon varPhi varPsi varOmega
"""
_SYMBOLS = """
infty partial nabla forall exists nexists emptyset varnothing neg lnot aleph beth hbar hslash
ell wp Re Im imath jmath prime backprime angle measuredangle triangle square blacksquare
star ast bullet cdot cdots ldots dots dotsb dotsc dotsi dotsm dotso vdots ddots circ
times div pm mp oplus ominus otimes oslash odot cap cup sqcap sqcup vee wedge land lor
setminus smallsetminus wr amalg dagger ddagger uplus bigcirc diamond
leq le geq ge neq ne equiv approx cong sim simeq propto ll gg subset supset subseteq
supseteq subsetneq supsetneq in notin ni mid nmid parallel nparallel perp models vdash
dashv prec succ preceq succeq asymp doteq lessgtr gtrless leqslant geqslant lesssim gtrsim
ngtr nless nleq ngeq approxeq triangleq coloneqq eqqcolon
to gets leftarrow rightarrow Leftarrow Rightarrow leftrightarrow Leftrightarrow
longleftarrow longrightarrow Longleftarrow Longrightarrow longleftrightarrow
Longleftrightarrow mapsto longmapsto uparrow downarrow Uparrow Downarrow updownarrow
Updownarrow nearrow searrow swarrow nwarrow hookleftarrow hookrightarrow
leftharpoonup rightharpoonup leftharpoondown rightharpoondown rightleftharpoons
implies impliedby iff xrightarrow xleftarrow
sum prod coprod int iint iiint oint bigcup bigcap bigoplus bigotimes bigodot biguplus
bigsqcup bigvee bigwedge lim limsup liminf max min sup inf det gcd Pr arg deg dim exp
hom ker lg ln log sin cos tan cot sec csc arcsin arccos arctan sinh cosh tanh coth
operatorname operatorname* mathop
frac dfrac tfrac cfrac binom dbinom tbinom sqrt over choose atop
left right middle big Big bigg Bigg bigl bigr Bigl Bigr biggl biggr Biggl Biggr
langle rangle lceil rceil lfloor rfloor lvert rvert lVert rVert vert Vert backslash
lbrace rbrace lbrack rbrack
hat widehat tilde widetilde bar overline underline vec dot ddot dddot acute grave
breve check mathring overrightarrow overleftarrow overbrace underbrace overset underset
stackrel xleftrightarrow boxed cancel bcancel xcancel sout not
mathrm mathbf mathit mathsf mathtt mathcal mathbb mathfrak mathscr boldsymbol bm
textrm textbf textit textsf texttt text textnormal emph rm bf it sf tt cal
displaystyle textstyle scriptstyle scriptscriptstyle
quad qquad enspace thinspace medspace thickspace negthinspace hspace vspace kern mkern
mskip hskip space nobreakspace phantom hphantom vphantom smash
begin end limits nolimits substack
color textcolor colorbox
label tag notag nonumber
pmod bmod mod pod
ldotp cdotp colon
"""


def _words(block):
    return frozenset(block.split())


DEFAULT_COMMANDS = _words(_GREEK) | _words(_SYMBOLS)
DEFAULT_ENVIRONMENTS = frozenset(
    """
    matrix matrix* pmatrix pmatrix* bmatrix bmatrix* Bmatrix Bmatrix* vmatrix vmatrix*
    Vmatrix Vmatrix* smallmatrix cases dcases rcases drcases array darray subarray
    aligned alignedat gathered split align align* alignat alignat* gather gather*
    equation equation* CD
    """.split()
)


@dataclass(frozen=True)
class MathAllowlist:
    commands: frozenset = DEFAULT_COMMANDS
    environments: frozenset = DEFAULT_ENVIRONMENTS

    def extended(self, commands=(), environments=()):
        return MathAllowlist(
            self.commands | {c.lstrip("\\") for c in commands},
            self.environments | frozenset(environments),
        )

    def __contains__(self, command):
        return command in self.commands


DEFAULT_ALLOWLIST = MathAllowlist()


def load_allowlist(path, include_defaults=True) -> MathAllowlist:
    """Read an allowlist file: one command per line, ``#`` comments.

    Lines of the form ``env:NAME`` add an environment instead of a command.
    A leading backslash on command names is optional.
    """
    commands, envs = set(), set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read allowlist {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("env:"):
            name = line[4:].strip()
            if not re.fullmatch(r"[A-Za-z]+\*?", name):
                raise ConfigError(f"{path}:{lineno}: bad environment name {name!r}")
            envs.add(name)
            continue
        name = line.lstrip("\\")
        if not re.fullmatch(r"[A-Za-z]+\*?", name):
            raise ConfigError(f"{path}:{lineno}: bad command name {line!r}")
        commands.add(name)
    base = DEFAULT_ALLOWLIST if include_defaults else MathAllowlist(frozenset(), frozenset())
    return base.extended(commands, envs)


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    issues: tuple = field(default=())

    def __bool__(self):
        return self.valid


def validate_math(span: str, allowlist: MathAllowlist | None = None) -> ValidationResult:
    """Check one math span (without its delimiters)."""
    allow = allowlist or DEFAULT_ALLOWLIST
    issues = []
    stack = []  # entries: "{" | "left" | ("env", name)
    n = len(span)
    k = 0
    while k < n:
        c = span[k]
        if c == "\\":
            if k + 1 >= n:
                issues.append("dangling backslash")
                break
            if not span[k + 1].isalpha() or not span[k + 1].isascii():
                k += 2  # control symbol: \{ \} \, \\ ...
                continue
            j = k + 1
            while j < n and span[j].isascii() and span[j].isalpha():
                j += 1
            name = span[k + 1:j]
            if j < n and span[j] == "*" and name + "*" in allow.commands:
                j += 1
                name += "*"
            k = j
            if name in ("begin", "end"):
                m = _ENV_NAME.match(span, k)
                if not m:
                    issues.append("malformed environment")
                    continue
                env = m.group(1)
                k = m.end()
                if env not in allow.environments:
                    issues.append(f"unknown environment {env}")
                if name == "begin":
                    stack.append(("env", env))
                    continue
                top = stack[-1] if stack else None
                if isinstance(top, tuple):
                    stack.pop()
                    if top[1] != env:
                        issues.append("environment mismatch")
                else:
                    issues.append("unmatched \\end")
                continue
            if name not in allow.commands:
                issues.append(f"unknown command \\{name}")
            if name == "left":
                stack.append("left")
            elif name == "right":
                if stack and stack[-1] == "left":
                    stack.pop()
                else:
                    issues.append("unmatched \\right")
            elif name == "middle" and "left" not in stack:
                issues.append("unmatched \\middle")
            continue
        if c == "{":
            stack.append("{")
        elif c == "}":
            if stack and stack[-1] == "{":
                stack.pop()
            else:
                issues.append("unbalanced brace")
        k += 1
    for entry in reversed(stack):
        if entry == "{":
            issues.append("unbalanced brace")
        elif entry == "left":
            issues.append("unmatched \\left")
        else:
            issues.append("unclosed environment")
    for m in _HTML_TAG.finditer(span):
        issues.append(f"html tag {m.group(0)}")
    return ValidationResult(not issues, tuple(issues))


def is_structural(issue: str) -> bool:
    """True for issues about delimiter/environment balance (vs. vocabulary)."""
    return issue in STRUCTURAL_ISSUES
