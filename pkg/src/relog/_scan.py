"""Shared tokenizer for the small text formats (signatures, structures,
definition systems, formulas)."""

from .errors import ParseError

# multi-character symbols first so the scanner prefers them
_SYMBOLS = ["<=", "!=", "->", "(", ")", "{", "}", ",", ";", ".", "*", "=", "&", "|", "~", "/"]


class Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind, text, line, column):
        self.kind = kind  # "name", "int", "sym", "eof"
        self.text = text
        self.line = line
        self.column = column

    def __repr__(self):
        return f"Token({self.kind},{self.text!r})"


def tokenize(text):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":  # comment to end of line
            while i < n and text[i] != "\n":
                i += 1
            continue
        matched = None
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                matched = sym
                break
        if matched:
            tokens.append(Token("sym", matched, line, col))
            i += len(matched)
            col += len(matched)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("name", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class Scanner:
    """Cursor over a token list with the usual expect/accept helpers."""

    def __init__(self, text):
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def cur(self):
        return self.tokens[self.pos]

    def error(self, message):
        t = self.cur
        raise ParseError(message, t.line, t.column)

    def at(self, kind, text=None):
        t = self.cur
        return t.kind == kind and (text is None or t.text == text)

    def at_name(self, text=None):
        return self.at("name", text)

    def accept(self, kind, text=None):
        if self.at(kind, text):
            t = self.cur
            self.pos += 1
            return t
        return None

    def expect(self, kind, text=None):
        t = self.accept(kind, text)
        if t is None:
            want = text if text is not None else kind
            self.error(f"expected {want!r}, found {self.cur.text!r}")
        return t

    def expect_name(self):
        return self.expect("name").text

    def expect_int(self):
        return int(self.expect("int").text)

    def done(self):
        return self.at("eof")

    def expect_done(self):
        if not self.done():
            self.error(f"unexpected trailing input {self.cur.text!r}")
