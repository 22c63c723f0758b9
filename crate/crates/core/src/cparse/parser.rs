//! Recursive-descent parser for a single C function definition.
//!
//! The grammar is a pragmatic subset of C: no typedef table is kept, so
//! declarations are recognized by shape (`T x`, `T *x =`, keyword-led
//! specifiers). Macro invocations parse as calls, and a call-shaped macro
//! followed by a block (`FOREACH(x) { ... }`) parses as a `MacroStmt`.

use super::ast::{kinds, Ast, AstNode};
use super::lexer::{Position, Token, TokenKind};
use super::ParseError;

const MAX_DEPTH: usize = 200;

const TYPE_SPECIFIERS: &[&str] = &[
    "void",
    "char",
    "short",
    "int",
    "long",
    "float",
    "double",
    "signed",
    "unsigned",
    "_Bool",
    "_Complex",
    "struct",
    "union",
    "enum",
    "__signed__",
    "typeof",
    "__typeof__",
];
const QUALIFIERS: &[&str] =
    &["const", "volatile", "restrict", "__restrict", "__restrict__", "__const", "_Atomic", "__volatile__"];
const STORAGE: &[&str] = &[
    "static",
    "extern",
    "register",
    "auto",
    "inline",
    "__inline",
    "__inline__",
    "typedef",
    "_Noreturn",
    "_Thread_local",
    "__extension__",
];

fn is_kw(tok: &Token, set: &[&str]) -> bool {
    tok.kind == TokenKind::Keyword && set.contains(&tok.text.as_str())
}

fn is_specifier_keyword(tok: &Token) -> bool {
    is_kw(tok, TYPE_SPECIFIERS) || is_kw(tok, QUALIFIERS) || is_kw(tok, STORAGE) || tok.is("__attribute__")
}

fn is_word(tok: &Token) -> bool {
    matches!(tok.kind, TokenKind::Identifier | TokenKind::Keyword | TokenKind::IntegerLiteral | TokenKind::FloatLiteral)
}

/// Renders type tokens as one space-free value: adjacent words are joined
/// with `_`, punctuation is glued on (`const char *` becomes `const_char*`).
fn join_type_text<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> String {
    let mut out = String::new();
    let mut prev_word = false;
    for tok in tokens {
        let word = is_word(tok);
        if word && prev_word {
            out.push('_');
        }
        out.push_str(&tok.text);
        prev_word = word;
    }
    out
}

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

fn binary_precedence(tok: &Token) -> Option<u8> {
    if tok.kind != TokenKind::Operator {
        return None;
    }
    Some(match tok.text.as_str() {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

struct Declarator {
    name: Option<Token>,
    type_text: String,
    dims: Vec<AstNode>,
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'t> Parser<'t> {
    fn new(toks: &'t [Token]) -> Self {
        Self { toks, pos: 0, depth: 0 }
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(text))
    }

    fn at_offset(&self, n: usize, text: &str) -> bool {
        self.peek_at(n).is_some_and(|t| t.is(text))
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn bump(&mut self) -> PResult<&'t Token> {
        let tok = self.toks.get(self.pos).ok_or_else(|| self.syntax("unexpected end of input"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> PResult<&'t Token> {
        if self.at(text) {
            self.bump()
        } else {
            let found = self.peek().map_or("end of input".to_string(), |t| format!("{:?}", t.text));
            Err(self.syntax(&format!("expected {text:?}, found {found}")))
        }
    }

    fn position(&self) -> Position {
        self.peek().or_else(|| self.toks.last()).map(|t| t.position).unwrap_or_default()
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { position: self.position(), message: message.to_string() }
    }

    fn unsupported(&self, construct: &str) -> ParseError {
        ParseError::Unsupported { position: self.position(), construct: construct.to_string() }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.unsupported("nesting deeper than parser limit"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Skips a balanced `(...)`, `[...]` or `{...}` group starting at the
    /// current opener.
    fn skip_balanced(&mut self) -> PResult<()> {
        let open = self.bump()?.text.clone();
        let close = match open.as_str() {
            "(" => ")",
            "[" => "]",
            "{" => "}",
            _ => return Err(self.syntax("expected a bracket")),
        };
        let mut depth = 1usize;
        while depth > 0 {
            let tok = self.bump()?;
            if tok.is(&open) {
                depth += 1;
            } else if tok.is(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn skip_attributes(&mut self) -> PResult<()> {
        while self.at("__attribute__") {
            self.bump()?;
            if self.at("(") {
                self.skip_balanced()?;
            }
        }
        Ok(())
    }

    // ---------------------------------------------------------------- types

    /// Declaration specifiers. Storage classes and attributes are consumed
    /// but not rendered. Returns `None` when no specifier is present.
    fn parse_specifiers(&mut self, in_type_name: bool) -> PResult<Option<String>> {
        let mut parts: Vec<&Token> = Vec::new();
        let mut has_base = false;
        loop {
            let Some(tok) = self.peek() else { break };
            if tok.is("__attribute__") {
                self.skip_attributes()?;
            } else if is_kw(tok, STORAGE) {
                self.bump()?;
            } else if is_kw(tok, QUALIFIERS) {
                parts.push(self.bump()?);
            } else if tok.is("struct") || tok.is("union") || tok.is("enum") {
                parts.push(self.bump()?);
                self.skip_attributes()?;
                if self.at_kind(TokenKind::Identifier) {
                    parts.push(self.bump()?);
                }
                if self.at("{") {
                    self.skip_balanced()?;
                }
                has_base = true;
            } else if tok.is("typeof") || tok.is("__typeof__") {
                parts.push(self.bump()?);
                if self.at("(") {
                    self.skip_balanced()?;
                }
                has_base = true;
            } else if is_kw(tok, TYPE_SPECIFIERS) {
                parts.push(self.bump()?);
                has_base = true;
            } else if tok.kind == TokenKind::Identifier && !has_base {
                let next_ends_declarator =
                    self.peek_at(1).map_or(true, |n| [";", "=", ",", "[", ")", ":"].iter().any(|p| n.is(p)));
                if next_ends_declarator && !in_type_name {
                    break;
                }
                parts.push(self.bump()?);
                has_base = true;
            } else {
                break;
            }
        }
        if parts.is_empty() {
            return Ok(None);
        }
        Ok(Some(join_type_text(parts)))
    }

    /// Parses a (possibly abstract) declarator. Pointer stars are folded into
    /// the type text; sized array suffixes become `ArrayDim` children.
    fn parse_declarator(&mut self, base: &str) -> PResult<Declarator> {
        let mut type_text = base.to_string();
        loop {
            if self.eat("*") {
                type_text.push('*');
            } else if self.peek().is_some_and(|t| is_kw(t, QUALIFIERS)) {
                self.bump()?;
            } else if self.at("__attribute__") {
                self.skip_attributes()?;
            } else {
                break;
            }
        }

        let mut name = None;
        let mut dims = Vec::new();
        if self.at_kind(TokenKind::Identifier) {
            name = Some(self.bump()?.clone());
        } else if self.at("(") && (self.at_offset(1, "*") || self.at_offset(1, "^")) {
            // Function pointer: (*name)(params) or (*)(params).
            self.bump()?;
            let inner = self.parse_declarator("")?;
            self.expect(")")?;
            name = inner.name;
            dims = inner.dims;
            if self.at("(") {
                self.skip_balanced()?;
            }
            type_text.push_str("(*)()");
        }

        loop {
            if self.at("[") {
                if self.at_offset(1, "]") {
                    self.bump()?;
                    self.bump()?;
                    type_text.push_str("[]");
                } else {
                    self.bump()?;
                    let size = self.parse_expression()?;
                    self.expect("]")?;
                    dims.push(AstNode::node(kinds::ARRAY_DIM, vec![size]));
                }
            } else if self.at("(") && name.is_some() {
                // Nested function prototype.
                self.skip_balanced()?;
                type_text.push_str("()");
            } else if self.at("__attribute__") {
                self.skip_attributes()?;
            } else if self.at(":") {
                return Err(self.unsupported("bit-field declarator"));
            } else {
                break;
            }
        }
        Ok(Declarator { name, type_text, dims })
    }

    fn parse_type_name(&mut self) -> PResult<AstNode> {
        let base = self.parse_specifiers(true)?.ok_or_else(|| self.syntax("expected a type name"))?;
        let decl = self.parse_declarator(&base)?;
        if decl.name.is_some() {
            return Err(self.syntax("unexpected identifier in type name"));
        }
        Ok(AstNode::terminal(kinds::TYPE_NAME, decl.type_text))
    }

    /// Whether `(` at the current position opens a type name, as in a cast,
    /// compound literal or `sizeof(T)`.
    fn paren_opens_type(&self, for_sizeof: bool) -> bool {
        if !self.at("(") {
            return false;
        }
        let Some(first) = self.peek_at(1) else { return false };
        if is_kw(first, TYPE_SPECIFIERS) || is_kw(first, QUALIFIERS) {
            return true;
        }
        if first.kind != TokenKind::Identifier {
            return false;
        }
        let mut i = 2;
        if self.at_offset(i, "*") {
            while self.at_offset(i, "*") || self.peek_at(i).is_some_and(|t| is_kw(t, QUALIFIERS)) {
                i += 1;
            }
            return self.at_offset(i, ")");
        }
        if self.peek_at(i).is_some_and(|t| is_kw(t, QUALIFIERS)) {
            return true;
        }
        if !self.at_offset(i, ")") || for_sizeof {
            return false;
        }
        // `(T) x`: decide by what follows the closing paren.
        match self.peek_at(i + 1) {
            Some(t) => match t.kind {
                TokenKind::Identifier
                | TokenKind::IntegerLiteral
                | TokenKind::FloatLiteral
                | TokenKind::CharLiteral
                | TokenKind::StringLiteral => true,
                TokenKind::Keyword => t.is("sizeof"),
                _ => t.is("(") || t.is("{") || t.is("~") || t.is("!"),
            },
            None => false,
        }
    }

    // ---------------------------------------------------------- declarations

    fn is_declaration_start(&self) -> bool {
        let Some(first) = self.peek() else { return false };
        if is_specifier_keyword(first) {
            return true;
        }
        if first.kind != TokenKind::Identifier {
            return false;
        }
        let Some(second) = self.peek_at(1) else { return false };
        if second.kind == TokenKind::Identifier {
            // `MACRO\n x = 1;` is a bare macro line, not a declaration.
            return second.position.line == first.position.line;
        }
        if is_specifier_keyword(second) {
            return true;
        }
        if second.is("*") {
            let mut i = 1;
            while self.at_offset(i, "*") || self.peek_at(i).is_some_and(|t| is_kw(t, QUALIFIERS)) {
                i += 1;
            }
            return self.peek_at(i).is_some_and(|t| t.kind == TokenKind::Identifier)
                && ["=", ";", ",", "[", ")"].iter().any(|p| self.at_offset(i + 1, p));
        }
        if second.is("(") && self.at_offset(2, "*") {
            return self.peek_at(3).is_some_and(|t| t.kind == TokenKind::Identifier)
                && self.at_offset(4, ")")
                && (self.at_offset(5, "(") || self.at_offset(5, "["));
        }
        false
    }

    fn parse_declaration(&mut self) -> PResult<AstNode> {
        if self.at("_Static_assert") {
            return Err(self.unsupported("_Static_assert"));
        }
        let base = self.parse_specifiers(false)?.ok_or_else(|| self.syntax("expected declaration specifiers"))?;
        if self.eat(";") {
            return Ok(AstNode::node(kinds::DECL_STMT, vec![AstNode::terminal(kinds::TYPE_NAME, base)]));
        }
        let mut decls = Vec::new();
        loop {
            let decl = self.parse_declarator(&base)?;
            let name = decl.name.ok_or_else(|| self.syntax("expected a declarator name"))?;
            let mut children = vec![
                AstNode::terminal(kinds::TYPE_NAME, decl.type_text),
                AstNode::terminal(kinds::NAME_EXPR, name.text.clone()),
            ];
            children.extend(decl.dims);
            if self.eat("=") {
                children.push(self.parse_initializer()?);
            }
            decls.push(AstNode::node(kinds::VAR_DECL, children));
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(AstNode::node(kinds::DECL_STMT, decls))
    }

    fn parse_initializer(&mut self) -> PResult<AstNode> {
        if !self.at("{") {
            return self.parse_assignment();
        }
        self.enter()?;
        self.bump()?;
        let mut items = Vec::new();
        while !self.at("}") {
            items.push(self.parse_init_item()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        self.leave();
        if items.is_empty() {
            return Ok(AstNode::terminal(kinds::INIT_LIST, "{}"));
        }
        Ok(AstNode::node(kinds::INIT_LIST, items))
    }

    fn parse_init_item(&mut self) -> PResult<AstNode> {
        let mut designators = Vec::new();
        loop {
            if self.at(".") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
                self.bump()?;
                designators.push(AstNode::terminal(kinds::FIELD_NAME, self.bump()?.text.clone()));
            } else if self.at("[") {
                self.bump()?;
                let index = self.parse_conditional()?;
                if self.at("...") {
                    return Err(self.unsupported("range designator"));
                }
                self.expect("]")?;
                designators.push(AstNode::node(kinds::ARRAY_DIM, vec![index]));
            } else {
                break;
            }
        }
        if designators.is_empty() {
            return self.parse_initializer();
        }
        self.expect("=")?;
        designators.push(self.parse_initializer()?);
        Ok(AstNode::node(kinds::DESIGNATED_INIT, designators))
    }

    // ------------------------------------------------------------ statements

    fn parse_block(&mut self) -> PResult<AstNode> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.at_end() {
                return Err(self.syntax("unterminated block"));
            }
            stmts.push(self.parse_statement()?);
        }
        self.bump()?;
        if stmts.is_empty() {
            return Ok(AstNode::terminal(kinds::EMPTY_STMT, "{}"));
        }
        Ok(AstNode::node(kinds::BLOCK, stmts))
    }

    fn parse_paren_expr(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let e = self.parse_expression()?;
        self.expect(")")?;
        Ok(e)
    }

    fn parse_statement(&mut self) -> PResult<AstNode> {
        self.enter()?;
        let stmt = self.parse_statement_inner();
        self.leave();
        stmt
    }

    fn parse_statement_inner(&mut self) -> PResult<AstNode> {
        let tok = self.peek().ok_or_else(|| self.syntax("expected a statement"))?;
        if tok.is("{") {
            return self.parse_block();
        }
        if tok.is(";") {
            self.bump()?;
            return Ok(AstNode::terminal(kinds::EMPTY_STMT, ";"));
        }
        if tok.kind == TokenKind::Keyword {
            match tok.text.as_str() {
                "if" => {
                    self.bump()?;
                    let cond = self.parse_paren_expr()?;
                    let then = self.parse_statement()?;
                    let mut children = vec![cond, then];
                    if self.eat("else") {
                        children.push(self.parse_statement()?);
                    }
                    return Ok(AstNode::node(kinds::IF_STMT, children));
                }
                "while" => {
                    self.bump()?;
                    let cond = self.parse_paren_expr()?;
                    let body = self.parse_statement()?;
                    return Ok(AstNode::node(kinds::WHILE_STMT, vec![cond, body]));
                }
                "do" => {
                    self.bump()?;
                    let body = self.parse_statement()?;
                    self.expect("while")?;
                    let cond = self.parse_paren_expr()?;
                    self.expect(";")?;
                    return Ok(AstNode::node(kinds::DO_WHILE_STMT, vec![body, cond]));
                }
                "for" => return self.parse_for(),
                "switch" => {
                    self.bump()?;
                    let cond = self.parse_paren_expr()?;
                    let body = self.parse_statement()?;
                    return Ok(AstNode::node(kinds::SWITCH_STMT, vec![cond, body]));
                }
                "case" => {
                    self.bump()?;
                    let label = self.parse_conditional()?;
                    if self.at("...") {
                        return Err(self.unsupported("case range"));
                    }
                    self.expect(":")?;
                    let mut children = vec![label];
                    if !self.at("}") {
                        children.push(self.parse_statement()?);
                    }
                    return Ok(AstNode::node(kinds::CASE_STMT, children));
                }
                "default" => {
                    self.bump()?;
                    self.expect(":")?;
                    if self.at("}") {
                        return Ok(AstNode::terminal(kinds::DEFAULT_STMT, "default"));
                    }
                    let body = self.parse_statement()?;
                    return Ok(AstNode::node(kinds::DEFAULT_STMT, vec![body]));
                }
                "return" => {
                    self.bump()?;
                    if self.eat(";") {
                        return Ok(AstNode::terminal(kinds::RETURN_STMT, "return"));
                    }
                    let value = self.parse_expression()?;
                    self.expect(";")?;
                    return Ok(AstNode::node(kinds::RETURN_STMT, vec![value]));
                }
                "break" => {
                    self.bump()?;
                    self.expect(";")?;
                    return Ok(AstNode::terminal(kinds::BREAK_STMT, "break"));
                }
                "continue" => {
                    self.bump()?;
                    self.expect(";")?;
                    return Ok(AstNode::terminal(kinds::CONTINUE_STMT, "continue"));
                }
                "goto" => {
                    self.bump()?;
                    if !self.at_kind(TokenKind::Identifier) {
                        return Err(self.unsupported("computed goto"));
                    }
                    let label = self.bump()?.text.clone();
                    self.expect(";")?;
                    return Ok(AstNode::node(kinds::GOTO_STMT, vec![AstNode::terminal(kinds::LABEL_NAME, label)]));
                }
                "asm" | "__asm__" | "__asm" => return Err(self.unsupported("inline assembly")),
                _ => {}
            }
        }
        if tok.kind == TokenKind::Identifier && self.at_offset(1, ":") {
            self.bump()?;
            self.bump()?;
            let label = AstNode::terminal(kinds::LABEL_NAME, tok.text.clone());
            if self.at("}") {
                return Ok(AstNode::node(kinds::LABEL_STMT, vec![label]));
            }
            let body = self.parse_statement()?;
            return Ok(AstNode::node(kinds::LABEL_STMT, vec![label, body]));
        }
        if self.is_declaration_start() {
            return self.parse_declaration();
        }
        self.parse_expression_statement()
    }

    fn parse_expression_statement(&mut self) -> PResult<AstNode> {
        let expr = self.parse_expression()?;
        if self.eat(";") {
            return Ok(AstNode::node(kinds::EXPR_STMT, vec![expr]));
        }
        let macro_like = expr.kind == kinds::CALL_EXPR || expr.kind == kinds::NAME_EXPR;
        if macro_like && self.at("{") {
            let body = self.parse_block()?;
            return Ok(AstNode::node(kinds::MACRO_STMT, vec![expr, body]));
        }
        // A call-shaped macro used as a statement without a trailing `;`.
        let prev_line = self.toks[self.pos - 1].position.line;
        if macro_like && self.peek().is_some_and(|t| t.position.line > prev_line) {
            return Ok(AstNode::node(kinds::MACRO_STMT, vec![expr]));
        }
        self.expect(";")?;
        unreachable!("expect(\";\") fails when `;` is absent")
    }

    fn parse_for(&mut self) -> PResult<AstNode> {
        self.expect("for")?;
        self.expect("(")?;
        let mut children = Vec::new();
        if !self.eat(";") {
            let init = if self.is_declaration_start() {
                self.parse_declaration()?
            } else {
                let e = self.parse_expression()?;
                self.expect(";")?;
                e
            };
            children.push(AstNode::node(kinds::FOR_INIT, vec![init]));
        }
        if !self.eat(";") {
            let cond = self.parse_expression()?;
            self.expect(";")?;
            children.push(AstNode::node(kinds::FOR_COND, vec![cond]));
        }
        if !self.at(")") {
            let update = self.parse_expression()?;
            children.push(AstNode::node(kinds::FOR_UPDATE, vec![update]));
        }
        self.expect(")")?;
        children.push(self.parse_statement()?);
        Ok(AstNode::node(kinds::FOR_STMT, children))
    }

    // ----------------------------------------------------------- expressions

    fn parse_expression(&mut self) -> PResult<AstNode> {
        let first = self.parse_assignment()?;
        if !self.at(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat(",") {
            items.push(self.parse_assignment()?);
        }
        Ok(AstNode::node(kinds::COMMA_EXPR, items))
    }

    fn parse_assignment(&mut self) -> PResult<AstNode> {
        self.enter()?;
        let lhs = self.parse_conditional()?;
        let result = match self.peek() {
            Some(t) if t.kind == TokenKind::Operator && ASSIGN_OPS.contains(&t.text.as_str()) => {
                let op = self.bump()?.text.clone();
                let rhs = self.parse_assignment()?;
                AstNode::node(kinds::assign(&op), vec![lhs, rhs])
            }
            _ => lhs,
        };
        self.leave();
        Ok(result)
    }

    fn parse_conditional(&mut self) -> PResult<AstNode> {
        let cond = self.parse_binary(1)?;
        if !self.eat("?") {
            return Ok(cond);
        }
        if self.eat(":") {
            let otherwise = self.parse_conditional()?;
            return Ok(AstNode::node(kinds::CONDITIONAL_EXPR, vec![cond, otherwise]));
        }
        let then = self.parse_expression()?;
        self.expect(":")?;
        let otherwise = self.parse_conditional()?;
        Ok(AstNode::node(kinds::CONDITIONAL_EXPR, vec![cond, then, otherwise]))
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<AstNode> {
        let mut lhs = self.parse_unary()?;
        while let Some(prec) = self.peek().and_then(binary_precedence) {
            if prec < min_prec {
                break;
            }
            let op = self.bump()?.text.clone();
            let rhs = self.parse_binary(prec + 1)?;
            lhs = AstNode::node(kinds::binary(&op), vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> PResult<AstNode> {
        self.enter()?;
        let node = self.parse_unary_inner();
        self.leave();
        node
    }

    fn parse_unary_inner(&mut self) -> PResult<AstNode> {
        let tok = self.peek().ok_or_else(|| self.syntax("expected an expression"))?;
        if tok.kind == TokenKind::Operator {
            match tok.text.as_str() {
                "++" | "--" | "&" | "*" | "+" | "-" | "!" | "~" => {
                    self.bump()?;
                    let operand = self.parse_unary()?;
                    return Ok(AstNode::node(kinds::unary(&tok.text), vec![operand]));
                }
                "&&" => return Err(self.unsupported("label address")),
                _ => {}
            }
        }
        if tok.is("sizeof") {
            self.bump()?;
            if self.paren_opens_type(true) {
                self.bump()?;
                let ty = self.parse_type_name()?;
                self.expect(")")?;
                return Ok(AstNode::node(kinds::SIZEOF_EXPR, vec![ty]));
            }
            let operand = self.parse_unary()?;
            return Ok(AstNode::node(kinds::SIZEOF_EXPR, vec![operand]));
        }
        if tok.is("__extension__") {
            self.bump()?;
            return self.parse_unary();
        }
        if self.paren_opens_type(false) {
            self.bump()?;
            let ty = self.parse_type_name()?;
            self.expect(")")?;
            if self.at("{") {
                let init = self.parse_initializer()?;
                let lit = AstNode::node(kinds::COMPOUND_LITERAL_EXPR, vec![ty, init]);
                return self.parse_postfix_ops(lit);
            }
            let operand = self.parse_unary()?;
            return Ok(AstNode::node(kinds::CAST_EXPR, vec![ty, operand]));
        }
        let primary = self.parse_primary()?;
        self.parse_postfix_ops(primary)
    }

    fn parse_postfix_ops(&mut self, mut expr: AstNode) -> PResult<AstNode> {
        loop {
            if self.eat("[") {
                let index = self.parse_expression()?;
                self.expect("]")?;
                expr = AstNode::node(kinds::ARRAY_ACCESS_EXPR, vec![expr, index]);
            } else if self.at("(") {
                self.bump()?;
                let mut children = vec![expr];
                if !self.at(")") {
                    loop {
                        children.push(self.parse_argument()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                expr = AstNode::node(kinds::CALL_EXPR, children);
            } else if self.at(".") || self.at("->") {
                let kind = if self.bump()?.text == "." { kinds::FIELD_ACCESS_EXPR } else { kinds::POINTER_ACCESS_EXPR };
                let field = self.bump()?;
                if field.kind != TokenKind::Identifier {
                    return Err(self.syntax("expected a field name"));
                }
                expr = AstNode::node(kind, vec![expr, AstNode::terminal(kinds::FIELD_NAME, field.text.clone())]);
            } else if self.at("++") || self.at("--") {
                let op = self.bump()?.text.clone();
                expr = AstNode::node(kinds::postfix(&op), vec![expr]);
            } else {
                return Ok(expr);
            }
        }
    }

    /// Call arguments may be type names when the callee is a macro
    /// (`va_arg(ap, int)`, `offsetof(struct s, f)`).
    fn parse_argument(&mut self) -> PResult<AstNode> {
        let starts_type = self.peek().is_some_and(|t| is_kw(t, TYPE_SPECIFIERS) || is_kw(t, QUALIFIERS));
        if starts_type {
            return self.parse_type_name();
        }
        if self.at_kind(TokenKind::Identifier) && self.at_offset(1, "*") {
            // `Type *` as a macro argument.
            let mut i = 1;
            while self.at_offset(i, "*") {
                i += 1;
            }
            if self.at_offset(i, ",") || self.at_offset(i, ")") {
                return self.parse_type_name();
            }
        }
        self.parse_assignment()
    }

    fn parse_primary(&mut self) -> PResult<AstNode> {
        let tok = self.bump()?;
        match tok.kind {
            TokenKind::Identifier => Ok(AstNode::terminal(kinds::NAME_EXPR, tok.text.clone())),
            TokenKind::IntegerLiteral => Ok(AstNode::terminal(kinds::INTEGER_LITERAL_EXPR, tok.text.clone())),
            TokenKind::FloatLiteral => Ok(AstNode::terminal(kinds::FLOAT_LITERAL_EXPR, tok.text.clone())),
            TokenKind::CharLiteral => Ok(AstNode::terminal(kinds::CHAR_LITERAL_EXPR, tok.text.clone())),
            TokenKind::StringLiteral => {
                let mut text = tok.text.clone();
                // Adjacent literals concatenate, including through format
                // macros such as `"%" PRIx64 "\n"`.
                loop {
                    if self.at_kind(TokenKind::StringLiteral)
                        || (self.at_kind(TokenKind::Identifier)
                            && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::StringLiteral))
                    {
                        text.push_str(&self.bump()?.text);
                    } else {
                        break;
                    }
                }
                Ok(AstNode::terminal(kinds::STRING_LITERAL_EXPR, text))
            }
            _ if tok.is("(") => {
                if self.at("{") {
                    return Err(self.unsupported("statement expression"));
                }
                let inner = self.parse_expression()?;
                self.expect(")")?;
                Ok(inner)
            }
            _ => {
                self.pos -= 1;
                Err(self.syntax(&format!("unexpected token {:?}", tok.text)))
            }
        }
    }
}

// --------------------------------------------------------------- functions

/// Index of the opener matching the closer at `close`.
fn matching_open(tokens: &[Token], close: usize) -> Option<usize> {
    let mut depth = 0usize;
    for i in (0..=close).rev() {
        if tokens[i].is(")") {
            depth += 1;
        } else if tokens[i].is("(") {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn parse_params(tokens: &[Token]) -> PResult<Option<AstNode>> {
    if tokens.is_empty() || (tokens.len() == 1 && tokens[0].is("void")) {
        return Ok(None);
    }
    let mut p = Parser::new(tokens);
    let mut params = Vec::new();
    loop {
        if p.eat("...") {
            params.push(AstNode::terminal(kinds::VARIADIC_PARAM, "..."));
        } else {
            let base = match p.parse_specifiers(false)? {
                Some(base) => base,
                // K&R identifier list: `f(a, b)`.
                None if p.at_kind(TokenKind::Identifier) => {
                    return Err(p.unsupported("K&R parameter list"));
                }
                None => return Err(p.syntax("expected a parameter")),
            };
            let decl = p.parse_declarator(&base)?;
            let mut children = vec![AstNode::terminal(kinds::TYPE_NAME, decl.type_text)];
            if let Some(name) = decl.name {
                children.push(AstNode::terminal(kinds::NAME_EXPR, name.text));
            }
            children.extend(decl.dims);
            params.push(AstNode::node(kinds::PARAM, children));
        }
        if !p.eat(",") {
            break;
        }
    }
    if !p.at_end() {
        return Err(p.syntax("unexpected token in parameter list"));
    }
    Ok(Some(AstNode::node(kinds::PARAM_LIST, params)))
}

/// Parses a token stream holding exactly one function definition.
pub fn parse_function(tokens: &[Token]) -> Result<Ast, ParseError> {
    let head = Parser::new(tokens);
    let Some(body_start) = tokens
        .iter()
        .enumerate()
        .scan(0i64, |depth, (i, t)| {
            if t.is("(") {
                *depth += 1;
            } else if t.is(")") {
                *depth -= 1;
            }
            Some((i, *depth, t))
        })
        .find(|(_, depth, t)| *depth == 0 && t.is("{"))
        .map(|(i, _, _)| i)
    else {
        return Err(head.syntax("no function body found"));
    };

    let mut header = &tokens[..body_start];
    // Trailing attributes after the parameter list.
    while let Some(last) = header.last() {
        if last.is(")") {
            let open = matching_open(header, header.len() - 1)
                .ok_or_else(|| head.syntax("unbalanced parentheses in function header"))?;
            if open > 0 && header[open - 1].is("(") && open >= 2 && header[open - 2].is("__attribute__") {
                header = &header[..open - 2];
                continue;
            }
        }
        break;
    }
    let Some(close) = header.iter().rposition(|t| t.is(")")) else {
        return Err(head.syntax("function header has no parameter list"));
    };
    if close != header.len() - 1 {
        return Err(ParseError::Unsupported {
            position: header[close + 1].position,
            construct: "K&R parameter declarations".into(),
        });
    }
    let open = matching_open(header, close).ok_or_else(|| head.syntax("unbalanced parentheses in function header"))?;
    let params = parse_params(&header[open + 1..close])?;

    // Name is the identifier before the parameter list, or before a macro
    // argument group such as `HELPER(shr_cc)(...)`.
    let mut name_end = open;
    if name_end > 0 && header[name_end - 1].is(")") {
        name_end = matching_open(header, name_end - 1)
            .ok_or_else(|| head.syntax("unbalanced parentheses in function header"))?;
    }
    if name_end == 0 || header[name_end - 1].kind != TokenKind::Identifier {
        let position = header.get(open).map(|t| t.position).unwrap_or_default();
        return Err(ParseError::Unsupported { position, construct: "function declarator shape".into() });
    }
    let name = &header[name_end - 1];

    let mut prefix = Vec::new();
    let mut i = 0;
    let prefix_tokens = &header[..name_end - 1];
    while i < prefix_tokens.len() {
        let t = &prefix_tokens[i];
        if t.is("__attribute__") {
            i += 1;
            if prefix_tokens.get(i).is_some_and(|t| t.is("(")) {
                let mut depth = 0usize;
                while i < prefix_tokens.len() {
                    if prefix_tokens[i].is("(") {
                        depth += 1;
                    } else if prefix_tokens[i].is(")") {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    i += 1;
                }
            }
        } else if !is_kw(t, STORAGE) {
            prefix.push(t);
        }
        i += 1;
    }

    let mut children = Vec::new();
    if !prefix.is_empty() {
        children.push(AstNode::terminal(kinds::TYPE_NAME, join_type_text(prefix)));
    }
    children.push(AstNode::terminal(kinds::FUNCTION_NAME, name.text.clone()));
    // Words inside a macro name group (`shr_cc` in `HELPER(shr_cc)`) are
    // kept as further name terminals.
    for t in &header[name_end..open] {
        if matches!(t.kind, TokenKind::Identifier | TokenKind::IntegerLiteral) {
            children.push(AstNode::terminal(kinds::FUNCTION_NAME, t.text.clone()));
        }
    }
    children.extend(params);

    let mut body_parser = Parser::new(&tokens[body_start..]);
    let body = body_parser.parse_block()?;
    if body.kind == kinds::EMPTY_STMT {
        return Err(ParseError::Unsupported {
            position: tokens[body_start].position,
            construct: "empty function body".into(),
        });
    }
    body_parser.eat(";");
    if !body_parser.at_end() {
        return Err(body_parser.syntax("trailing tokens after function body"));
    }
    children.push(body);
    Ast::new(AstNode::node(kinds::FUNCTION_DEF, children))
}
