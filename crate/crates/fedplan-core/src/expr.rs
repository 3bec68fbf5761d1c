//! Minimal logical expression grammar for transform parameters.
//!
//! Expressions are stored in pipelines as strings and parsed on demand:
//! identifiers (optionally dot-qualified), literals, comparison and boolean
//! operators, arithmetic, and calls to catalog functions. The grammar is
//! deliberately dialect-free; the code generator rewrites function names and
//! quoting per target dialect.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Column reference; may contain dots (`t1.amount`).
    Column(String),
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Call { name: String, args: Vec<Expr> },
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }

    pub fn sql_symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "OR",
            BinaryOp::And => "AND",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    /// Binding strength for parenthesization; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div => 5,
        }
    }
}

/// An expression with an optional `AS alias` suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasedExpr {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl Expr {
    /// Collects every function name called anywhere in the expression.
    pub fn collect_functions(&self, out: &mut alloc::collections::BTreeSet<String>) {
        match self {
            Expr::Call { name, args } => {
                out.insert(name.clone());
                for arg in args {
                    arg.collect_functions(out);
                }
            }
            Expr::Unary { operand, .. } => operand.collect_functions(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_functions(out);
                rhs.collect_functions(out);
            }
            _ => {}
        }
    }

    /// Collects every column name referenced in the expression.
    pub fn collect_columns(&self, out: &mut alloc::collections::BTreeSet<String>) {
        match self {
            Expr::Column(name) => {
                out.insert(name.clone());
            }
            Expr::Call { args, .. } => {
                for arg in args {
                    arg.collect_columns(out);
                }
            }
            Expr::Unary { operand, .. } => operand.collect_columns(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_columns(out);
                rhs.collect_columns(out);
            }
            _ => {}
        }
    }
}

/// Parse error with a byte offset into the expression source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError {
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.pos, self.message)
    }
}

pub fn parse_expr(source: &str) -> Result<Expr, ExprError> {
    let mut parser = Parser::new(source)?;
    let expr = parser.parse_or()?;
    parser.expect_end()?;
    Ok(expr)
}

/// Parses `expr [AS alias]`.
pub fn parse_aliased(source: &str) -> Result<AliasedExpr, ExprError> {
    let mut parser = Parser::new(source)?;
    let expr = parser.parse_or()?;
    let alias = if parser.eat_keyword("AS") {
        Some(parser.expect_ident()?)
    } else {
        None
    };
    parser.expect_end()?;
    Ok(AliasedExpr { expr, alias })
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Symbol(&'static str),
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    index: usize,
    end: usize,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn tokenize(source: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if is_ident_start(b) {
            while i < bytes.len() && is_ident_byte(bytes[i]) {
                i += 1;
            }
            tokens.push((start, Token::Ident(source[start..i].to_string())));
        } else if b.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut float = false;
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                float = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text = &source[start..i];
            let token = if float {
                Token::Float(text.parse::<f64>().map_err(|_| ExprError {
                    pos: start,
                    message: "invalid numeric literal".to_string(),
                })?)
            } else {
                Token::Int(text.parse::<i64>().map_err(|_| ExprError {
                    pos: start,
                    message: "integer literal out of range".to_string(),
                })?)
            };
            tokens.push((start, token));
        } else if b == b'\'' {
            let mut value = String::new();
            i += 1;
            loop {
                if i >= bytes.len() {
                    return Err(ExprError {
                        pos: start,
                        message: "unterminated string literal".to_string(),
                    });
                }
                if bytes[i] == b'\'' {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'\'' {
                        value.push('\'');
                        i += 2;
                    } else {
                        i += 1;
                        break;
                    }
                } else {
                    // byte-wise copy is safe: the delimiter is ASCII
                    let ch_start = i;
                    let mut ch_end = i + 1;
                    while ch_end < bytes.len() && (bytes[ch_end] & 0xC0) == 0x80 {
                        ch_end += 1;
                    }
                    value.push_str(&source[ch_start..ch_end]);
                    i = ch_end;
                }
            }
            tokens.push((start, Token::Str(value)));
        } else {
            let two = if i + 1 < bytes.len() { &source[i..i + 2] } else { "" };
            let symbol = match two {
                "<=" => Some("<="),
                ">=" => Some(">="),
                "!=" => Some("!="),
                "<>" => Some("<>"),
                _ => None,
            };
            if let Some(sym) = symbol {
                tokens.push((start, Token::Symbol(sym)));
                i += 2;
            } else {
                let sym = match b {
                    b'=' => "=",
                    b'<' => "<",
                    b'>' => ">",
                    b'+' => "+",
                    b'-' => "-",
                    b'*' => "*",
                    b'/' => "/",
                    b'(' => "(",
                    b')' => ")",
                    b',' => ",",
                    b'.' => ".",
                    _ => {
                        return Err(ExprError {
                            pos: start,
                            message: format!("unexpected character {:?}", b as char),
                        })
                    }
                };
                tokens.push((start, Token::Symbol(sym)));
                i += 1;
            }
        }
    }
    Ok(tokens)
}

impl Parser {
    fn new(source: &str) -> Result<Parser, ExprError> {
        let tokens = tokenize(source)?;
        Ok(Parser {
            tokens,
            index: 0,
            end: source.len(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.index).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.index).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.index).map(|(_, t)| t.clone());
        if token.is_some() {
            self.index += 1;
        }
        token
    }

    fn eat_symbol(&mut self, symbol: &str) -> bool {
        if matches!(self.peek(), Some(Token::Symbol(s)) if *s == symbol) {
            self.index += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, keyword: &str) -> bool {
        if matches!(self.peek(), Some(Token::Ident(w)) if w.eq_ignore_ascii_case(keyword)) {
            self.index += 1;
            true
        } else {
            false
        }
    }

    fn expect_symbol(&mut self, symbol: &'static str) -> Result<(), ExprError> {
        if self.eat_symbol(symbol) {
            Ok(())
        } else {
            Err(self.error(format!("expected {symbol:?}")))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ExprError> {
        match self.bump() {
            Some(Token::Ident(w)) => Ok(w),
            _ => {
                self.index = self.index.saturating_sub(1);
                Err(self.error("expected an identifier".to_string()))
            }
        }
    }

    fn expect_end(&mut self) -> Result<(), ExprError> {
        if self.index == self.tokens.len() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input".to_string()))
        }
    }

    fn error(&self, message: String) -> ExprError {
        ExprError {
            pos: self.pos(),
            message,
        }
    }

    fn parse_or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_and()?;
        while self.eat_keyword("OR") {
            let rhs = self.parse_and()?;
            lhs = Expr::Binary {
                op: BinaryOp::Or,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_not()?;
        while self.eat_keyword("AND") {
            let rhs = self.parse_not()?;
            lhs = Expr::Binary {
                op: BinaryOp::And,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_not(&mut self) -> Result<Expr, ExprError> {
        if self.eat_keyword("NOT") {
            let operand = self.parse_not()?;
            Ok(Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(operand),
            })
        } else {
            self.parse_comparison()
        }
    }

    fn parse_comparison(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.parse_additive()?;
        let op = match self.peek() {
            Some(Token::Symbol("=")) => Some(BinaryOp::Eq),
            Some(Token::Symbol("!=")) | Some(Token::Symbol("<>")) => Some(BinaryOp::Ne),
            Some(Token::Symbol("<")) => Some(BinaryOp::Lt),
            Some(Token::Symbol("<=")) => Some(BinaryOp::Le),
            Some(Token::Symbol(">")) => Some(BinaryOp::Gt),
            Some(Token::Symbol(">=")) => Some(BinaryOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.index += 1;
            let rhs = self.parse_additive()?;
            Ok(Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            })
        } else {
            Ok(lhs)
        }
    }

    fn parse_additive(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            let op = if self.eat_symbol("+") {
                BinaryOp::Add
            } else if self.eat_symbol("-") {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.parse_multiplicative()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = if self.eat_symbol("*") {
                BinaryOp::Mul
            } else if self.eat_symbol("/") {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat_symbol("-") {
            let operand = self.parse_unary()?;
            Ok(Expr::Unary {
                op: UnaryOp::Neg,
                operand: Box::new(operand),
            })
        } else {
            self.parse_primary()
        }
    }

    fn parse_primary(&mut self) -> Result<Expr, ExprError> {
        match self.bump() {
            Some(Token::Int(v)) => Ok(Expr::Int(v)),
            Some(Token::Float(v)) => Ok(Expr::Float(v)),
            Some(Token::Str(v)) => Ok(Expr::Str(v)),
            Some(Token::Ident(word)) => {
                if word.eq_ignore_ascii_case("TRUE") {
                    return Ok(Expr::Bool(true));
                }
                if word.eq_ignore_ascii_case("FALSE") {
                    return Ok(Expr::Bool(false));
                }
                if self.eat_symbol("(") {
                    // function call; names are canonicalized to upper case
                    let mut args = Vec::new();
                    if !self.eat_symbol(")") {
                        loop {
                            args.push(self.parse_or()?);
                            if self.eat_symbol(")") {
                                break;
                            }
                            self.expect_symbol(",")?;
                        }
                    }
                    return Ok(Expr::Call {
                        name: word.to_ascii_uppercase(),
                        args,
                    });
                }
                // dotted column reference
                let mut name = word;
                while self.eat_symbol(".") {
                    name.push('.');
                    name.push_str(&self.expect_ident()?);
                }
                Ok(Expr::Column(name))
            }
            Some(Token::Symbol("(")) => {
                let inner = self.parse_or()?;
                self.expect_symbol(")")?;
                Ok(inner)
            }
            _ => {
                self.index = self.index.saturating_sub(1);
                Err(self.error("expected an expression".to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    #[test]
    fn parses_nested_calls_and_alias() {
        let aliased = parse_aliased("UPPER(TRIM(name)) AS CleanName").unwrap();
        assert_eq!(aliased.alias.as_deref(), Some("CleanName"));
        match aliased.expr {
            Expr::Call { name, args } => {
                assert_eq!(name, "UPPER");
                assert!(matches!(&args[0], Expr::Call { name, .. } if name == "TRIM"));
            }
            other => panic!("unexpected expr {other:?}"),
        }
    }

    #[test]
    fn parses_boolean_predicates() {
        let expr = parse_expr("status = 'completed' AND amount > 0").unwrap();
        match expr {
            Expr::Binary { op: BinaryOp::And, lhs, rhs } => {
                assert!(matches!(*lhs, Expr::Binary { op: BinaryOp::Eq, .. }));
                assert!(matches!(*rhs, Expr::Binary { op: BinaryOp::Gt, .. }));
            }
            other => panic!("unexpected expr {other:?}"),
        }
    }

    #[test]
    fn parses_qualified_columns() {
        let expr = parse_expr("t_prune.customer_id = t_rank.customer_id").unwrap();
        let mut columns = BTreeSet::new();
        expr.collect_columns(&mut columns);
        assert_eq!(
            columns.into_iter().collect::<vec::Vec<_>>(),
            vec!["t_prune.customer_id", "t_rank.customer_id"]
        );
    }

    #[test]
    fn reports_error_positions() {
        let err = parse_expr("age > ").unwrap_err();
        assert_eq!(err.pos, 6);
        let err = parse_expr("a ~ b").unwrap_err();
        assert_eq!(err.pos, 2);
        assert!(parse_expr("LENGTH(name").is_err());
        assert!(parse_expr("'unterminated").is_err());
    }

    #[test]
    fn string_escapes_and_precedence() {
        assert_eq!(
            parse_expr("'it''s'").unwrap(),
            Expr::Str("it's".to_string())
        );
        // a + b * c parses as a + (b * c)
        let expr = parse_expr("a + b * c").unwrap();
        assert!(matches!(expr, Expr::Binary { op: BinaryOp::Add, .. }));
    }

    #[test]
    fn function_names_are_canonicalized() {
        let expr = parse_expr("length(name) > 3").unwrap();
        let mut functions = BTreeSet::new();
        expr.collect_functions(&mut functions);
        assert!(functions.contains("LENGTH"));
    }
}
