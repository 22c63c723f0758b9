//! Rooted ordered tree of typed nodes.
//!
//! Terminals are exactly the leaves and carry a token value; interior nodes
//! carry only a kind. The JSON form (`kind`, `value`, `children`) is the
//! interchange format for external front-ends, see `docs/ast-json.md`.

use serde::{Deserialize, Serialize};

use super::ParseError;

/// Node-kind names emitted by the built-in parser.
///
/// These strings end up inside hashed path strings, so renaming any of them
/// changes every downstream path hash. Bump [`KIND_LIST_VERSION`] when they
/// change.
pub mod kinds {
    pub const KIND_LIST_VERSION: u32 = 1;

    pub const FUNCTION_DEF: &str = "FunctionDef";
    pub const FUNCTION_NAME: &str = "FunctionName";
    pub const TYPE_NAME: &str = "TypeName";
    pub const PARAM_LIST: &str = "ParamList";
    pub const PARAM: &str = "Param";
    pub const VARIADIC_PARAM: &str = "VariadicParam";

    pub const BLOCK: &str = "Block";
    pub const DECL_STMT: &str = "DeclStmt";
    pub const VAR_DECL: &str = "VarDecl";
    pub const ARRAY_DIM: &str = "ArrayDim";
    pub const INIT_LIST: &str = "InitList";
    pub const DESIGNATED_INIT: &str = "DesignatedInit";
    pub const EXPR_STMT: &str = "ExprStmt";
    pub const IF_STMT: &str = "IfStmt";
    pub const WHILE_STMT: &str = "WhileStmt";
    pub const DO_WHILE_STMT: &str = "DoWhileStmt";
    pub const FOR_STMT: &str = "ForStmt";
    pub const FOR_INIT: &str = "ForInit";
    pub const FOR_COND: &str = "ForCond";
    pub const FOR_UPDATE: &str = "ForUpdate";
    pub const SWITCH_STMT: &str = "SwitchStmt";
    pub const CASE_STMT: &str = "CaseStmt";
    pub const DEFAULT_STMT: &str = "DefaultStmt";
    pub const RETURN_STMT: &str = "ReturnStmt";
    pub const BREAK_STMT: &str = "BreakStmt";
    pub const CONTINUE_STMT: &str = "ContinueStmt";
    pub const GOTO_STMT: &str = "GotoStmt";
    pub const LABEL_STMT: &str = "LabelStmt";
    pub const LABEL_NAME: &str = "LabelName";
    pub const EMPTY_STMT: &str = "EmptyStmt";
    pub const MACRO_STMT: &str = "MacroStmt";

    pub const ASSIGN_EXPR: &str = "AssignExpr";
    pub const BINARY_EXPR: &str = "BinaryExpr";
    pub const UNARY_EXPR: &str = "UnaryExpr";
    pub const POSTFIX_EXPR: &str = "PostfixExpr";
    pub const CONDITIONAL_EXPR: &str = "ConditionalExpr";
    pub const CALL_EXPR: &str = "CallExpr";
    pub const FIELD_ACCESS_EXPR: &str = "FieldAccessExpr";
    pub const POINTER_ACCESS_EXPR: &str = "PointerAccessExpr";
    pub const FIELD_NAME: &str = "FieldName";
    pub const ARRAY_ACCESS_EXPR: &str = "ArrayAccessExpr";
    pub const CAST_EXPR: &str = "CastExpr";
    pub const SIZEOF_EXPR: &str = "SizeofExpr";
    pub const COMMA_EXPR: &str = "CommaExpr";
    pub const COMPOUND_LITERAL_EXPR: &str = "CompoundLiteralExpr";

    pub const NAME_EXPR: &str = "NameExpr";
    pub const INTEGER_LITERAL_EXPR: &str = "IntegerLiteralExpr";
    pub const FLOAT_LITERAL_EXPR: &str = "FloatLiteralExpr";
    pub const CHAR_LITERAL_EXPR: &str = "CharLiteralExpr";
    pub const STRING_LITERAL_EXPR: &str = "StringLiteralExpr";

    /// Plain `=` is `AssignExpr`; compound forms append the operator,
    /// e.g. `AssignExpr:&=`.
    pub fn assign(op: &str) -> String {
        if op == "=" {
            ASSIGN_EXPR.to_string()
        } else {
            format!("{ASSIGN_EXPR}:{op}")
        }
    }

    pub fn binary(op: &str) -> String {
        format!("{BINARY_EXPR}:{op}")
    }

    pub fn unary(op: &str) -> String {
        format!("{UNARY_EXPR}:{op}")
    }

    pub fn postfix(op: &str) -> String {
        format!("{POSTFIX_EXPR}:{op}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn terminal(kind: impl Into<String>, value: impl Into<String>) -> Self {
        Self { kind: kind.into(), value: Some(value.into()), children: Vec::new() }
    }

    /// Interior node. Callers must pass at least one child.
    pub fn node(kind: impl Into<String>, children: Vec<AstNode>) -> Self {
        debug_assert!(!children.is_empty());
        Self { kind: kind.into(), value: None, children }
    }

    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(AstNode::size).sum::<usize>()
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a AstNode)) {
        visit(self);
        for child in &self.children {
            child.walk(visit);
        }
    }

    /// Terminal values in source (pre-order) order.
    pub fn terminal_values(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let Some(v) = &n.value {
                out.push(v.as_str());
            }
        });
        out
    }

    fn check(&self) -> Result<(), String> {
        match (&self.value, self.children.is_empty()) {
            (Some(v), true) if !v.is_empty() => {}
            (Some(_), true) => return Err(format!("terminal {} has an empty value", self.kind)),
            (None, false) => {}
            (None, true) => return Err(format!("leaf {} has no value", self.kind)),
            (Some(_), false) => return Err(format!("interior node {} carries a value", self.kind)),
        }
        if self.kind.is_empty() {
            return Err("node with empty kind".into());
        }
        self.children.iter().try_for_each(AstNode::check)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ast {
    pub root: AstNode,
}

impl Ast {
    /// Wraps a root after checking the tree invariants: root kind is
    /// `FunctionDef` and every node is either a valued leaf or a valueless
    /// interior node.
    pub fn new(root: AstNode) -> Result<Self, ParseError> {
        if root.kind != kinds::FUNCTION_DEF {
            return Err(ParseError::InvalidTree(format!("root kind is {}, expected FunctionDef", root.kind)));
        }
        root.check().map_err(ParseError::InvalidTree)?;
        Ok(Self { root })
    }

    pub fn terminal_count(&self) -> usize {
        let mut n = 0;
        self.root.walk(&mut |node| {
            if node.is_terminal() {
                n += 1
            }
        });
        n
    }

    /// Reads a tree produced by an external front-end.
    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        let root: AstNode =
            serde_json::from_str(text).map_err(|e| ParseError::InvalidTree(format!("bad AST JSON: {e}")))?;
        Self::new(root)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.root).expect("AST serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let root = AstNode::node(
            kinds::FUNCTION_DEF,
            vec![AstNode::terminal(kinds::TYPE_NAME, "void"), AstNode::terminal(kinds::FUNCTION_NAME, "f")],
        );
        let ast = Ast::new(root).unwrap();
        let json = ast.to_json();
        assert_eq!(
            json,
            r#"{"kind":"FunctionDef","children":[{"kind":"TypeName","value":"void"},{"kind":"FunctionName","value":"f"}]}"#
        );
        assert_eq!(Ast::from_json(&json).unwrap(), ast);
    }

    #[test]
    fn rejects_bad_trees() {
        assert!(Ast::from_json(r#"{"kind":"Block","children":[{"kind":"NameExpr","value":"x"}]}"#).is_err());
        assert!(Ast::from_json(r#"{"kind":"FunctionDef"}"#).is_err());
        assert!(Ast::from_json(r#"{"kind":"FunctionDef","value":"v","children":[{"kind":"NameExpr","value":"x"}]}"#)
            .is_err());
        assert!(Ast::from_json(r#"{"kind":"FunctionDef","children":[{"kind":"NameExpr"}]}"#).is_err());
        assert!(Ast::from_json("not json").is_err());
    }
}
