//! A small expression language for functionals of sequence coordinates.
//!
//! Syntax: literals, coordinates `x1..xn`, unary minus, `+ - * / ^`, and the
//! functions `abs`, `sgn`, `pos`, `pow`, `max`, `min` (the last two
//! variadic). `^` is right-associative and binds tighter than unary minus,
//! so `-x1^2` is `-(x1^2)`. Parsing is arity-checked: referencing `x4` in a
//! two-coordinate context is an error at parse time, not eval time.

use std::fmt;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ExprError {
    SyntaxError { offset: usize, detail: String },
    UnknownIdentifier { offset: usize, name: String },
    ArityError { name: String, expected: &'static str, got: usize },
    EvalError { detail: String },
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprError::SyntaxError { offset, detail } => {
                write!(f, "syntax error at byte {offset}: {detail}")
            }
            ExprError::UnknownIdentifier { offset, name } => {
                write!(f, "unknown identifier {name:?} at byte {offset}")
            }
            ExprError::ArityError { name, expected, got } => {
                write!(f, "{name} expects {expected} argument(s), got {got}")
            }
            ExprError::EvalError { detail } => write!(f, "evaluation error: {detail}"),
        }
    }
}

impl std::error::Error for ExprError {}

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    /// Zero-based coordinate index; `x1` parses to `Var(0)`.
    Var(usize),
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>),
    Pow(Box<ExprAst>, Box<ExprAst>),
    Abs(Box<ExprAst>),
    Sgn(Box<ExprAst>),
    /// Positive part: `pos(x) = max(x, 0)`.
    Pos(Box<ExprAst>),
    Max(Vec<ExprAst>),
    Min(Vec<ExprAst>),
}

impl ExprAst {
    /// Parses `text` against a fixed coordinate count.
    pub fn parse(text: &str, arity: usize) -> Result<Self, ExprError> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0, arity };
        let ast = parser.expr()?;
        parser.expect_end()?;
        Ok(ast)
    }

    /// Parses with the arity inferred as the highest coordinate mentioned
    /// (at least 1). Returns the tree and the inferred arity.
    pub fn parse_infer_arity(text: &str) -> Result<(Self, usize), ExprError> {
        let tokens = tokenize(text)?;
        let mut arity = 1;
        for t in &tokens {
            if let Token::Ident(name, _) = t {
                if let Some(ix) = var_index(name) {
                    arity = arity.max(ix + 1);
                }
            }
        }
        let mut parser = Parser { tokens, pos: 0, arity };
        let ast = parser.expr()?;
        parser.expect_end()?;
        Ok((ast, arity))
    }

    /// Evaluates at a coordinate point. Division by zero, fractional powers
    /// of negative bases, and overflow to non-finite values are errors.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        let v = match self {
            ExprAst::Num(n) => *n,
            ExprAst::Var(i) => *point.get(*i).ok_or_else(|| ExprError::EvalError {
                detail: format!("coordinate x{} out of range for point of length {}", i + 1, point.len()),
            })?,
            ExprAst::Neg(e) => -e.eval(point)?,
            ExprAst::Add(a, b) => a.eval(point)? + b.eval(point)?,
            ExprAst::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            ExprAst::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            ExprAst::Div(a, b) => {
                let d = b.eval(point)?;
                if d == 0.0 {
                    return Err(ExprError::EvalError { detail: "division by zero".into() });
                }
                a.eval(point)? / d
            }
            ExprAst::Pow(a, b) => {
                let base = a.eval(point)?;
                let exp = b.eval(point)?;
                if base < 0.0 && exp.fract() != 0.0 {
                    return Err(ExprError::EvalError {
                        detail: format!("fractional power {exp} of negative base {base}"),
                    });
                }
                base.powf(exp)
            }
            ExprAst::Abs(e) => e.eval(point)?.abs(),
            ExprAst::Sgn(e) => {
                let v = e.eval(point)?;
                if v == 0.0 {
                    0.0
                } else {
                    v.signum()
                }
            }
            ExprAst::Pos(e) => e.eval(point)?.max(0.0),
            ExprAst::Max(args) => {
                let mut best = f64::NEG_INFINITY;
                for a in args {
                    best = best.max(a.eval(point)?);
                }
                best
            }
            ExprAst::Min(args) => {
                let mut best = f64::INFINITY;
                for a in args {
                    best = best.min(a.eval(point)?);
                }
                best
            }
        };
        if !v.is_finite() {
            return Err(ExprError::EvalError { detail: format!("non-finite result {v}") });
        }
        Ok(v)
    }

    /// Renders the tree with the minimal parentheses that re-parse to the
    /// same structure.
    pub fn print(&self) -> String {
        let mut out = String::new();
        self.print_into(&mut out, 0);
        out
    }

    // Precedence levels: `+ -` = 1, `* /` = 2, unary minus = 3, `^` = 4,
    // atoms = 5. A child is parenthesized when its level is below what its
    // position requires.
    fn level(&self) -> u8 {
        match self {
            ExprAst::Add(..) | ExprAst::Sub(..) => 1,
            ExprAst::Mul(..) | ExprAst::Div(..) => 2,
            ExprAst::Neg(..) => 3,
            ExprAst::Pow(..) => 4,
            ExprAst::Num(n) if *n < 0.0 => 3,
            _ => 5,
        }
    }

    fn print_into(&self, out: &mut String, min_level: u8) {
        let level = self.level();
        let parens = level < min_level;
        if parens {
            out.push('(');
        }
        match self {
            ExprAst::Num(n) => {
                out.push_str(&format!("{n}"));
            }
            ExprAst::Var(i) => {
                out.push_str(&format!("x{}", i + 1));
            }
            ExprAst::Neg(e) => {
                out.push('-');
                e.print_into(out, 4);
            }
            ExprAst::Add(a, b) => {
                a.print_into(out, 1);
                out.push_str(" + ");
                b.print_into(out, 2);
            }
            ExprAst::Sub(a, b) => {
                a.print_into(out, 1);
                out.push_str(" - ");
                b.print_into(out, 2);
            }
            ExprAst::Mul(a, b) => {
                a.print_into(out, 2);
                out.push_str(" * ");
                b.print_into(out, 3);
            }
            ExprAst::Div(a, b) => {
                a.print_into(out, 2);
                out.push_str(" / ");
                b.print_into(out, 3);
            }
            ExprAst::Pow(a, b) => {
                a.print_into(out, 5);
                out.push_str(" ^ ");
                b.print_into(out, 3);
            }
            ExprAst::Abs(e) | ExprAst::Sgn(e) | ExprAst::Pos(e) => {
                out.push_str(match self {
                    ExprAst::Abs(_) => "abs",
                    ExprAst::Sgn(_) => "sgn",
                    _ => "pos",
                });
                out.push('(');
                e.print_into(out, 0);
                out.push(')');
            }
            ExprAst::Max(args) | ExprAst::Min(args) => {
                out.push_str(if matches!(self, ExprAst::Max(_)) { "max" } else { "min" });
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    a.print_into(out, 0);
                }
                out.push(')');
            }
        }
        if parens {
            out.push(')');
        }
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print())
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64, usize),
    Ident(String, usize),
    Plus(usize),
    Minus(usize),
    Star(usize),
    Slash(usize),
    Caret(usize),
    LParen(usize),
    RParen(usize),
    Comma(usize),
}

impl Token {
    fn offset(&self) -> usize {
        match self {
            Token::Num(_, o)
            | Token::Ident(_, o)
            | Token::Plus(o)
            | Token::Minus(o)
            | Token::Star(o)
            | Token::Slash(o)
            | Token::Caret(o)
            | Token::LParen(o)
            | Token::RParen(o)
            | Token::Comma(o) => *o,
        }
    }

    fn describe(&self) -> String {
        match self {
            Token::Num(n, _) => format!("number {n}"),
            Token::Ident(s, _) => format!("identifier {s:?}"),
            Token::Plus(_) => "'+'".into(),
            Token::Minus(_) => "'-'".into(),
            Token::Star(_) => "'*'".into(),
            Token::Slash(_) => "'/'".into(),
            Token::Caret(_) => "'^'".into(),
            Token::LParen(_) => "'('".into(),
            Token::RParen(_) => "')'".into(),
            Token::Comma(_) => "','".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                tokens.push(Token::Plus(i));
                i += 1;
            }
            b'-' => {
                tokens.push(Token::Minus(i));
                i += 1;
            }
            b'*' => {
                tokens.push(Token::Star(i));
                i += 1;
            }
            b'/' => {
                tokens.push(Token::Slash(i));
                i += 1;
            }
            b'^' => {
                tokens.push(Token::Caret(i));
                i += 1;
            }
            b'(' => {
                tokens.push(Token::LParen(i));
                i += 1;
            }
            b')' => {
                tokens.push(Token::RParen(i));
                i += 1;
            }
            b',' => {
                tokens.push(Token::Comma(i));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(ExprError::SyntaxError {
                            offset: i,
                            detail: "expected digits after decimal point".into(),
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let n: f64 = lit.parse().map_err(|_| ExprError::SyntaxError {
                    offset: start,
                    detail: format!("bad number literal {lit:?}"),
                })?;
                tokens.push(Token::Num(n, start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token::Ident(text[start..i].to_string(), start));
            }
            _ => {
                return Err(ExprError::SyntaxError {
                    offset: i,
                    detail: format!("unexpected character {:?}", text[i..].chars().next().unwrap()),
                })
            }
        }
    }
    Ok(tokens)
}

/// `x7` → `Some(6)`; anything else → `None`.
fn var_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let ix: usize = digits.parse().ok()?;
    if ix == 0 {
        return None;
    }
    Some(ix - 1)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    arity: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_offset(&self) -> usize {
        self.tokens.last().map(|t| t.offset() + 1).unwrap_or(0)
    }

    fn expect_end(&self) -> Result<(), ExprError> {
        if let Some(t) = self.peek() {
            return Err(ExprError::SyntaxError {
                offset: t.offset(),
                detail: format!("unexpected {}", t.describe()),
            });
        }
        Ok(())
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus(_)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = ExprAst::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus(_)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = ExprAst::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star(_)) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = ExprAst::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash(_)) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = ExprAst::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power. `^` sits below, so `-x^2` negates the
    // power.
    fn unary(&mut self) -> Result<ExprAst, ExprError> {
        if matches!(self.peek(), Some(Token::Minus(_))) {
            self.bump();
            let inner = self.unary()?;
            return Ok(ExprAst::Neg(Box::new(inner)));
        }
        self.power()
    }

    // power := atom ('^' unary)?  — right-associative via the unary tail.
    fn power(&mut self) -> Result<ExprAst, ExprError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret(_))) {
            self.bump();
            let exp = self.unary()?;
            return Ok(ExprAst::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst, ExprError> {
        let t = self.bump().ok_or_else(|| ExprError::SyntaxError {
            offset: self.end_offset(),
            detail: "unexpected end of input".into(),
        })?;
        match t {
            Token::Num(n, _) => Ok(ExprAst::Num(n)),
            Token::LParen(offset) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Token::RParen(_)) => Ok(inner),
                    Some(other) => Err(ExprError::SyntaxError {
                        offset: other.offset(),
                        detail: format!("expected ')', found {}", other.describe()),
                    }),
                    None => Err(ExprError::SyntaxError {
                        offset,
                        detail: "unclosed '('".into(),
                    }),
                }
            }
            Token::Ident(name, offset) => self.ident(name, offset),
            other => Err(ExprError::SyntaxError {
                offset: other.offset(),
                detail: format!("expected a value, found {}", other.describe()),
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<ExprAst, ExprError> {
        if let Some(ix) = var_index(&name) {
            if ix >= self.arity {
                return Err(ExprError::UnknownIdentifier { offset, name });
            }
            return Ok(ExprAst::Var(ix));
        }
        let is_call = matches!(self.peek(), Some(Token::LParen(_)));
        if !is_call {
            return Err(ExprError::UnknownIdentifier { offset, name });
        }
        self.bump(); // consume '('
        let mut args = vec![self.expr()?];
        loop {
            match self.bump() {
                Some(Token::Comma(_)) => args.push(self.expr()?),
                Some(Token::RParen(_)) => break,
                Some(other) => {
                    return Err(ExprError::SyntaxError {
                        offset: other.offset(),
                        detail: format!("expected ',' or ')', found {}", other.describe()),
                    })
                }
                None => {
                    return Err(ExprError::SyntaxError {
                        offset,
                        detail: format!("unclosed argument list of {name}"),
                    })
                }
            }
        }
        let got = args.len();
        let one = |mut args: Vec<ExprAst>| Box::new(args.remove(0));
        match name.as_str() {
            "abs" if got == 1 => Ok(ExprAst::Abs(one(args))),
            "sgn" if got == 1 => Ok(ExprAst::Sgn(one(args))),
            "pos" if got == 1 => Ok(ExprAst::Pos(one(args))),
            "abs" | "sgn" | "pos" => Err(ExprError::ArityError { name, expected: "1", got }),
            "pow" if got == 2 => {
                let exp = args.pop().unwrap();
                let base = args.pop().unwrap();
                Ok(ExprAst::Pow(Box::new(base), Box::new(exp)))
            }
            "pow" => Err(ExprError::ArityError { name, expected: "2", got }),
            "max" if got >= 2 => Ok(ExprAst::Max(args)),
            "min" if got >= 2 => Ok(ExprAst::Min(args)),
            "max" | "min" => Err(ExprError::ArityError { name, expected: "at least 2", got }),
            _ => Err(ExprError::UnknownIdentifier { offset, name }),
        }
    }
}

// ---------------------------------------------------------------------------
