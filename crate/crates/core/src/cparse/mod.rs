//! C front-end: tokenizer and a recursive-descent parser for single function
//! definitions.

pub mod ast;
pub mod lexer;
pub mod parser;

pub use ast::{kinds, Ast, AstNode};
pub use lexer::{tokenize, Position, Token, TokenKind};
pub use parser::parse_function;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("lex error at {position}: {message}")]
    Lex { position: Position, message: String },
    #[error("parse error at {position}: {message}")]
    Syntax { position: Position, message: String },
    #[error("unsupported construct at {position}: {construct}")]
    Unsupported { position: Position, construct: String },
    #[error("invalid AST: {0}")]
    InvalidTree(String),
}

impl ParseError {
    /// Short machine-friendly category used in skip reports.
    pub fn category(&self) -> &'static str {
        match self {
            ParseError::Lex { .. } => "lex_error",
            ParseError::Syntax { .. } => "parse_error",
            ParseError::Unsupported { .. } => "parse_unsupported",
            ParseError::InvalidTree(_) => "invalid_tree",
        }
    }
}

/// Tokenizes and parses one function definition.
pub fn parse_source(source: &str) -> Result<Ast, ParseError> {
    let tokens = tokenize(source)?;
    parse_function(&tokens)
}
