//! C tokenizer.
//!
//! Comments and preprocessor directive lines are dropped. Line continuations
//! inside a directive are honored so a multi-line `#define` disappears whole.

use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Keyword,
    IntegerLiteral,
    FloatLiteral,
    CharLiteral,
    StringLiteral,
    Punctuator,
    Operator,
}

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub position: Position,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        matches!(self.kind, TokenKind::Operator | TokenKind::Punctuator | TokenKind::Keyword) && self.text == text
    }
}

pub const KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Complex",
    "_Atomic",
    "_Noreturn",
    "_Thread_local",
    "_Alignas",
    "_Alignof",
    "_Static_assert",
    "__inline",
    "__inline__",
    "__restrict",
    "__restrict__",
    "__volatile__",
    "__const",
    "__attribute__",
    "__asm__",
    "asm",
    "__asm",
    "__extension__",
    "__typeof__",
    "typeof",
    "__signed__",
];

// Longest first so maximal munch falls out of a linear scan.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "^=", "|=", "##", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?", ":", ".", "#",
];

const PUNCTUATORS: &[char] = &['(', ')', '[', ']', '{', '}', ';', ','];

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.chars().collect(), pos: 0, line: 1, column: 1, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn position(&self) -> Position {
        Position { line: self.line, column: self.column }
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek_at(i) == Some(c))
    }

    /// True when only horizontal whitespace precedes the cursor on this line.
    fn at_line_start(&self) -> bool {
        self.chars[..self.pos].iter().rev().take_while(|&&c| c != '\n').all(|c| c.is_whitespace())
    }
}

/// Splits C source text into tokens.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor::new(source);
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '\\' && matches!(cur.peek_at(1), Some('\n') | Some('\r')) {
            cur.bump();
            continue;
        }
        if cur.starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            let start = cur.position();
            cur.bump();
            cur.bump();
            loop {
                if cur.starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(ParseError::Lex { position: start, message: "unterminated comment".into() });
                }
            }
            continue;
        }
        if c == '#' && cur.at_line_start() {
            skip_directive(&mut cur);
            continue;
        }

        let start = cur.position();
        let token = if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let mut text = String::new();
            while let Some(c) = cur.peek() {
                if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                    text.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            // Prefixed char/string literals: L'x', u8"..." and friends.
            if matches!(text.as_str(), "L" | "u" | "U" | "u8") && matches!(cur.peek(), Some('"') | Some('\'')) {
                let quote = cur.bump().unwrap();
                let mut lit = text;
                lit.push(quote);
                lex_quoted(&mut cur, quote, &mut lit, start)?;
                let kind = if quote == '"' { TokenKind::StringLiteral } else { TokenKind::CharLiteral };
                Token { kind, text: lit, position: start }
            } else {
                let kind = if KEYWORDS.contains(&text.as_str()) { TokenKind::Keyword } else { TokenKind::Identifier };
                Token { kind, text, position: start }
            }
        } else if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur, start)
        } else if c == '"' || c == '\'' {
            cur.bump();
            let mut lit = String::from(c);
            lex_quoted(&mut cur, c, &mut lit, start)?;
            let kind = if c == '"' { TokenKind::StringLiteral } else { TokenKind::CharLiteral };
            Token { kind, text: lit, position: start }
        } else if PUNCTUATORS.contains(&c) {
            cur.bump();
            Token { kind: TokenKind::Punctuator, text: c.to_string(), position: start }
        } else if let Some(op) = OPERATORS.iter().find(|op| cur.starts_with(op)) {
            for _ in 0..op.len() {
                cur.bump();
            }
            Token { kind: TokenKind::Operator, text: (*op).to_string(), position: start }
        } else {
            return Err(ParseError::Lex { position: start, message: format!("illegal character {c:?}") });
        };
        tokens.push(token);
    }
    Ok(tokens)
}

fn skip_directive(cur: &mut Cursor<'_>) {
    while let Some(c) = cur.peek() {
        if c == '\\' && matches!(cur.peek_at(1), Some('\n')) {
            cur.bump();
            cur.bump();
            continue;
        }
        if c == '\\' && cur.peek_at(1) == Some('\r') && cur.peek_at(2) == Some('\n') {
            cur.bump();
            cur.bump();
            cur.bump();
            continue;
        }
        if c == '\n' {
            break;
        }
        cur.bump();
    }
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char, out: &mut String, start: Position) -> Result<(), ParseError> {
    loop {
        match cur.bump() {
            None | Some('\n') => {
                let what = if quote == '"' { "string" } else { "char" };
                return Err(ParseError::Lex { position: start, message: format!("unterminated {what} literal") });
            }
            Some('\\') => {
                out.push('\\');
                match cur.bump() {
                    Some(c) => out.push(c),
                    None => {
                        return Err(ParseError::Lex { position: start, message: "unterminated escape".into() });
                    }
                }
            }
            Some(c) => {
                out.push(c);
                if c == quote {
                    return Ok(());
                }
            }
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>, start: Position) -> Token {
    let mut text = String::new();
    let mut is_float = false;
    let hex = cur.starts_with("0x") || cur.starts_with("0X");
    if hex {
        text.push(cur.bump().unwrap());
        text.push(cur.bump().unwrap());
    }
    while let Some(c) = cur.peek() {
        let exponent = if hex { matches!(c, 'p' | 'P') } else { matches!(c, 'e' | 'E') };
        if exponent && matches!(cur.peek_at(1), Some('+') | Some('-')) {
            is_float = true;
            text.push(c);
            cur.bump();
            text.push(cur.bump().unwrap());
        } else if c == '.' {
            is_float = true;
            text.push(c);
            cur.bump();
        } else if c.is_ascii_alphanumeric() || c == '_' {
            if exponent {
                is_float = true;
            }
            text.push(c);
            cur.bump();
        } else {
            break;
        }
    }
    if !hex && text.trim_end_matches(|c: char| matches!(c, 'f' | 'F' | 'l' | 'L')).contains(['e', 'E']) {
        is_float = true;
    }
    let kind = if is_float { TokenKind::FloatLiteral } else { TokenKind::IntegerLiteral };
    Token { kind, text, position: start }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_text(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn assignment_statement() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text("x = 7;"),
            vec![
                (Identifier, "x".into()),
                (Operator, "=".into()),
                (IntegerLiteral, "7".into()),
                (Punctuator, ";".into()),
            ]
        );
    }

    #[test]
    fn arrow_member_access() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text("req->enqueued"),
            vec![(Identifier, "req".into()), (Operator, "->".into()), (Identifier, "enqueued".into())]
        );
    }

    #[test]
    fn compound_assignment() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text("shift &= 63;"),
            vec![
                (Identifier, "shift".into()),
                (Operator, "&=".into()),
                (IntegerLiteral, "63".into()),
                (Punctuator, ";".into()),
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("a\n  b").unwrap();
        assert_eq!(toks[0].position, Position { line: 1, column: 1 });
        assert_eq!(toks[1].position, Position { line: 2, column: 3 });
    }

    #[test]
    fn comments_and_directives_dropped() {
        let src = "#define FOO(x) \\\n   (x + 1)\nint /* c */ a; // tail\n  #if 0\nb;";
        let text: Vec<String> = tokenize(src).unwrap().into_iter().map(|t| t.text).collect();
        assert_eq!(text, ["int", "a", ";", "b", ";"]);
    }

    #[test]
    fn literals() {
        use TokenKind::*;
        let toks = kinds_and_text(r#"0x1F 1.5f 1e-3 'a' '\'' "s\"x" 10ULL L"w""#);
        let kinds: Vec<TokenKind> = toks.iter().map(|t| t.0).collect();
        assert_eq!(
            kinds,
            [
                IntegerLiteral,
                FloatLiteral,
                FloatLiteral,
                CharLiteral,
                CharLiteral,
                StringLiteral,
                IntegerLiteral,
                StringLiteral
            ]
        );
        assert_eq!(toks[5].1, r#""s\"x""#);
    }

    #[test]
    fn lex_errors() {
        assert!(matches!(tokenize("\"abc"), Err(ParseError::Lex { .. })));
        assert!(matches!(tokenize("'a"), Err(ParseError::Lex { .. })));
        let err = tokenize("a @ b").unwrap_err();
        match err {
            ParseError::Lex { position, .. } => assert_eq!(position, Position { line: 1, column: 3 }),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hash_inside_line_is_operator() {
        let toks = kinds_and_text("a # b");
        assert_eq!(toks[1], (TokenKind::Operator, "#".into()));
    }
}
