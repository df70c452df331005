//! Text form of codes and sketches.
//!
//! ```text
//! Run{ stmt (';' stmt)* }
//! stmt := action | Repeat(n){..} | RepeatUntil(goal){..} | While(c){..}
//!       | If(c){..} | IfElse(c){..}{..} | __blank__
//! ```
//!
//! Sketches use the same shape with `X` for counts, `B` for conditions, and
//! bodies that may be empty or omitted altogether.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::code::{Action, Code, Condition, GrammarError, Stmt};
use crate::sketch::{Construct, Sketch, SketchNode};

pub const BLANK: &str = "__blank__";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("grammar error: {0}")]
    Grammar(#[from] GrammarError),
}

struct Lexer<'s> {
    src: &'s str,
    pos: usize,
}

impl<'s> Lexer<'s> {
    fn new(src: &'s str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { position: self.pos, message: message.into() })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(got) => self.err(format!("expected '{c}', found '{got}'")),
            None => self.err(format!("expected '{c}', found end of input")),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Result<&'s str, ParseError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return self.err("expected identifier");
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(c) => self.err(format!("trailing input starting at '{c}'")),
        }
    }
}

/// Parses a concrete code; blanks are rejected.
pub fn parse_code(src: &str) -> Result<Code, ParseError> {
    let code = parse_code_unchecked(src)?;
    code.validate(false)?;
    Ok(code)
}

/// Parses a quiz code which may hold a single blank.
pub fn parse_quiz_code(src: &str) -> Result<Code, ParseError> {
    let code = parse_code_unchecked(src)?;
    code.validate(true)?;
    Ok(code)
}

fn parse_code_unchecked(src: &str) -> Result<Code, ParseError> {
    let mut lx = Lexer::new(src);
    let root = lx.word()?;
    if root != "Run" {
        return lx.err("program must start with Run");
    }
    let body = code_block(&mut lx)?;
    lx.finish()?;
    Ok(Code { body })
}

fn code_block(lx: &mut Lexer<'_>) -> Result<Vec<Stmt>, ParseError> {
    lx.expect('{')?;
    let mut out = Vec::new();
    if lx.eat('}') {
        return Ok(out);
    }
    loop {
        out.push(code_stmt(lx)?);
        if lx.eat(';') {
            continue;
        }
        lx.expect('}')?;
        return Ok(out);
    }
}

fn condition(lx: &mut Lexer<'_>) -> Result<Condition, ParseError> {
    lx.expect('(')?;
    lx.skip_ws();
    let start = lx.pos;
    let w = lx.word()?;
    let c = match Condition::from_name(w) {
        Some(c) => c,
        None => {
            lx.pos = start;
            return lx.err(format!("unknown condition '{w}'"));
        }
    };
    lx.expect(')')?;
    Ok(c)
}

fn code_stmt(lx: &mut Lexer<'_>) -> Result<Stmt, ParseError> {
    lx.skip_ws();
    let start = lx.pos;
    let w = lx.word()?;
    if let Some(a) = Action::from_name(w) {
        return Ok(Stmt::Action(a));
    }
    Ok(match w {
        BLANK => Stmt::Blank,
        "Repeat" => {
            lx.expect('(')?;
            lx.skip_ws();
            let at = lx.pos;
            let n = lx.word()?;
            let count = match n.parse::<u8>() {
                Ok(v) => v,
                Err(_) => {
                    lx.pos = at;
                    return lx.err(format!("invalid repeat count '{n}'"));
                }
            };
            lx.expect(')')?;
            Stmt::Repeat { count, body: code_block(lx)? }
        }
        "RepeatUntil" => {
            lx.expect('(')?;
            let at = lx.pos;
            if lx.word()? != "goal" {
                lx.pos = at;
                return lx.err("RepeatUntil only accepts goal");
            }
            lx.expect(')')?;
            Stmt::RepeatUntil { body: code_block(lx)? }
        }
        "While" => {
            let cond = condition(lx)?;
            Stmt::While { cond, body: code_block(lx)? }
        }
        "If" => {
            let cond = condition(lx)?;
            Stmt::If { cond, body: code_block(lx)? }
        }
        "IfElse" => {
            let cond = condition(lx)?;
            let then_body = code_block(lx)?;
            let else_body = code_block(lx)?;
            Stmt::IfElse { cond, then_body, else_body }
        }
        other => {
            lx.pos = start;
            return lx.err(format!("unknown block '{other}'"));
        }
    })
}

fn write_block(out: &mut String, body: &[Stmt]) {
    out.push('{');
    for (i, s) in body.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        write_stmt(out, s);
    }
    out.push('}');
}

fn write_stmt(out: &mut String, s: &Stmt) {
    match s {
        Stmt::Action(a) => out.push_str(a.name()),
        Stmt::Blank => out.push_str(BLANK),
        Stmt::Repeat { count, body } => {
            let _ = write!(out, "Repeat({count})");
            write_block(out, body);
        }
        Stmt::RepeatUntil { body } => {
            out.push_str("RepeatUntil(goal)");
            write_block(out, body);
        }
        Stmt::While { cond, body } => {
            let _ = write!(out, "While({cond})");
            write_block(out, body);
        }
        Stmt::If { cond, body } => {
            let _ = write!(out, "If({cond})");
            write_block(out, body);
        }
        Stmt::IfElse { cond, then_body, else_body } => {
            let _ = write!(out, "IfElse({cond})");
            write_block(out, then_body);
            write_block(out, else_body);
        }
    }
}

pub fn serialize_code(code: &Code) -> String {
    let mut out = String::from("Run");
    write_block(&mut out, &code.body);
    out
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_code(self))
    }
}

pub fn parse_sketch(src: &str) -> Result<Sketch, ParseError> {
    let mut lx = Lexer::new(src);
    // the braced form `{Run{..}}` is accepted too
    let wrapped = lx.eat('{');
    let root = lx.word()?;
    if root != "Run" {
        return lx.err("sketch must start with Run");
    }
    let body = if lx.peek() == Some('{') { sketch_block(&mut lx)? } else { Vec::new() };
    if wrapped {
        lx.expect('}')?;
    }
    lx.finish()?;
    let sketch = Sketch { body };
    sketch.validate()?;
    Ok(sketch)
}

fn sketch_block(lx: &mut Lexer<'_>) -> Result<Vec<SketchNode>, ParseError> {
    lx.expect('{')?;
    let mut out = Vec::new();
    if lx.eat('}') {
        return Ok(out);
    }
    loop {
        out.push(sketch_node(lx)?);
        if lx.eat(';') {
            continue;
        }
        lx.expect('}')?;
        return Ok(out);
    }
}

fn sketch_node(lx: &mut Lexer<'_>) -> Result<SketchNode, ParseError> {
    lx.skip_ws();
    let start = lx.pos;
    let w = lx.word()?;
    let (construct, arg) = match w {
        "Repeat" => (Construct::Repeat, "X"),
        "RepeatUntil" => (Construct::RepeatUntil, "goal"),
        "While" => (Construct::While, "B"),
        "If" => (Construct::If, "B"),
        "IfElse" => (Construct::IfElse, "B"),
        other => {
            lx.pos = start;
            return lx.err(format!("unknown sketch node '{other}'"));
        }
    };
    lx.expect('(')?;
    let at = lx.pos;
    if lx.word()? != arg {
        lx.pos = at;
        return lx.err(format!("{w} expects placeholder {arg}"));
    }
    lx.expect(')')?;
    let mut node = SketchNode::new(construct);
    if lx.peek() == Some('{') {
        node.body = sketch_block(lx)?;
        if construct == Construct::IfElse {
            if lx.peek() == Some('{') {
                node.else_body = sketch_block(lx)?;
            } else {
                return lx.err("IfElse needs two bodies or none");
            }
        }
    }
    Ok(node)
}

fn write_sketch_node(out: &mut String, n: &SketchNode) {
    out.push_str(match n.construct {
        Construct::Repeat => "Repeat(X)",
        Construct::RepeatUntil => "RepeatUntil(goal)",
        Construct::While => "While(B)",
        Construct::If => "If(B)",
        Construct::IfElse => "IfElse(B)",
    });
    if n.body.is_empty() && n.else_body.is_empty() {
        return;
    }
    write_sketch_block(out, &n.body);
    if n.construct == Construct::IfElse {
        write_sketch_block(out, &n.else_body);
    }
}

fn write_sketch_block(out: &mut String, body: &[SketchNode]) {
    out.push('{');
    for (i, n) in body.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        write_sketch_node(out, n);
    }
    out.push('}');
}

pub fn serialize_sketch(s: &Sketch) -> String {
    let mut out = String::from("Run");
    write_sketch_block(&mut out, &s.body);
    out
}

impl fmt::Display for Sketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_sketch(self))
    }
}

impl core::str::FromStr for Code {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_code(s)
    }
}

impl core::str::FromStr for Sketch {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sketch(s)
    }
}

/// Serialized form used as a canonical key.
pub fn canonical(code: &Code) -> String {
    code.to_string()
}
