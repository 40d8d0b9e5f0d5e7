//! Parsing and validation of TIR source text.
//!
//! Parsing is two-phase: a syntactic pass builds a raw tree with names, then
//! resolution interns variables, resolves globals/functions/labels, and runs
//! the validator (reachability, definite assignment, arity). The result is
//! either a structurally valid [`Program`] or the first error in source
//! order, so diagnostics are a pure function of the input text.

use super::*;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl ParseError {
    fn new(pos: Pos, msg: impl Into<String>) -> Self {
        ParseError { line: pos.line, col: pos.col, msg: msg.into() }
    }
}

type Result<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: u32,
    col: u32,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Assign,
    Sep, // `;` or newline: statement separator
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                out.push((Tok::Sep, pos));
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            ',' => {
                // Commas are interchangeable with spaces between operands.
                chars.next();
                col += 1;
            }
            ';' => {
                out.push((Tok::Sep, pos));
                chars.next();
                col += 1;
            }
            '{' => {
                out.push((Tok::LBrace, pos));
                chars.next();
                col += 1;
            }
            '}' => {
                out.push((Tok::RBrace, pos));
                chars.next();
                col += 1;
            }
            '(' => {
                out.push((Tok::LParen, pos));
                chars.next();
                col += 1;
            }
            ')' => {
                out.push((Tok::RParen, pos));
                chars.next();
                col += 1;
            }
            '[' => {
                out.push((Tok::LBracket, pos));
                chars.next();
                col += 1;
            }
            ']' => {
                out.push((Tok::RBracket, pos));
                chars.next();
                col += 1;
            }
            '=' => {
                out.push((Tok::Assign, pos));
                chars.next();
                col += 1;
            }
            '-' | '0'..='9' => {
                let mut s = String::new();
                s.push(c);
                chars.next();
                col += 1;
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let n: i64 = s
                    .parse()
                    .map_err(|_| ParseError::new(pos, format!("invalid integer `{s}`")))?;
                out.push((Tok::Int(n), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), pos));
            }
            other => {
                return Err(ParseError::new(pos, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

// -- raw (unresolved) tree ---------------------------------------------------

#[derive(Debug, Clone)]
enum Arg {
    Name(String, Pos),
    Int(i64, Pos),
}

#[derive(Debug)]
struct RawStmt {
    dst: Option<(String, Pos)>,
    op: String,
    args: Vec<Arg>,
    pos: Pos,
}

#[derive(Debug)]
struct RawBlock {
    label: String,
    pos: Pos,
    stmts: Vec<RawStmt>,
}

#[derive(Debug)]
struct RawFunc {
    name: String,
    pos: Pos,
    entry_label: String,
    entry_pos: Pos,
    params: Vec<(String, Pos)>,
    blocks: Vec<RawBlock>,
}

type RawGlobal = (String, u32, bool, Pos);
type RawItems = (Option<(String, Pos)>, Vec<RawGlobal>, Vec<RawFunc>);

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks
            .get(self.at)
            .or_else(|| self.toks.last())
            .map(|(_, p)| *p)
            .unwrap_or(Pos { line: 1, col: 1 })
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn skip_seps(&mut self) {
        while matches!(self.peek(), Some(Tok::Sep)) {
            self.at += 1;
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Pos)> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Ident(s), p)) => Ok((s, p)),
            _ => Err(ParseError::new(pos, format!("expected {what}"))),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Pos> {
        let pos = self.pos();
        match self.next() {
            Some((t, p)) if t == tok => Ok(p),
            _ => Err(ParseError::new(pos, format!("expected {what}"))),
        }
    }

    fn parse_items(&mut self) -> Result<RawItems> {
        let mut entry = None;
        let mut globals = Vec::new();
        let mut funcs = Vec::new();
        loop {
            self.skip_seps();
            let pos = self.pos();
            match self.next() {
                None => break,
                Some((Tok::Ident(kw), _)) if kw == "entry" => {
                    let (name, p) = self.expect_ident("entry function name")?;
                    if entry.is_some() {
                        return Err(ParseError::new(p, "duplicate entry declaration"));
                    }
                    entry = Some((name, p));
                }
                Some((Tok::Ident(kw), _)) if kw == "global" => {
                    let (name, p) = self.expect_ident("global name")?;
                    if matches!(self.peek(), Some(Tok::LBracket)) {
                        self.next();
                        let lpos = self.pos();
                        let len = match self.next() {
                            Some((Tok::Int(n), _)) if n > 0 => n as u32,
                            _ => {
                                return Err(ParseError::new(
                                    lpos,
                                    "array length must be a positive integer",
                                ))
                            }
                        };
                        self.expect(Tok::RBracket, "`]`")?;
                        globals.push((name, len, true, p));
                    } else {
                        globals.push((name, 1, false, p));
                    }
                }
                Some((Tok::Ident(kw), _)) if kw == "func" => {
                    funcs.push(self.parse_func()?);
                }
                _ => {
                    return Err(ParseError::new(
                        pos,
                        "expected `entry`, `global`, or `func` at top level",
                    ))
                }
            }
        }
        Ok((entry, globals, funcs))
    }

    fn parse_func(&mut self) -> Result<RawFunc> {
        let (name, pos) = self.expect_ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let (kw, kwp) = self.expect_ident("`entry=`")?;
        if kw != "entry" {
            return Err(ParseError::new(kwp, "expected `entry=` in function header"));
        }
        self.expect(Tok::Assign, "`=` after `entry`")?;
        let (entry_label, entry_pos) = self.expect_ident("entry block label")?;
        let mut params = Vec::new();
        if let Some(Tok::Ident(kw)) = self.peek() {
            if kw == "params" {
                self.next();
                self.expect(Tok::Assign, "`=` after `params`")?;
                while let Some(Tok::Ident(_)) = self.peek() {
                    let (p, pp) = self.expect_ident("parameter name")?;
                    params.push((p, pp));
                }
                if params.is_empty() {
                    return Err(ParseError::new(self.pos(), "empty parameter list"));
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        self.skip_seps();
        self.expect(Tok::LBrace, "`{` to open function body")?;
        let mut blocks = Vec::new();
        loop {
            self.skip_seps();
            let pos = self.pos();
            match self.next() {
                Some((Tok::RBrace, _)) => break,
                Some((Tok::Ident(kw), _)) if kw == "block" => {
                    blocks.push(self.parse_block()?);
                }
                _ => return Err(ParseError::new(pos, "expected `block` or `}`")),
            }
        }
        if blocks.is_empty() {
            return Err(ParseError::new(pos, format!("function `{name}` has no blocks")));
        }
        Ok(RawFunc { name, pos, entry_label, entry_pos, params, blocks })
    }

    fn parse_block(&mut self) -> Result<RawBlock> {
        let (label, pos) = self.expect_ident("block label")?;
        self.skip_seps();
        self.expect(Tok::LBrace, "`{` to open block")?;
        let mut stmts = Vec::new();
        loop {
            self.skip_seps();
            if matches!(self.peek(), Some(Tok::RBrace)) {
                self.next();
                break;
            }
            if self.peek().is_none() {
                return Err(ParseError::new(self.pos(), "unterminated block"));
            }
            stmts.push(self.parse_stmt()?);
        }
        if stmts.is_empty() {
            return Err(ParseError::new(pos, format!("block `{label}` is empty")));
        }
        Ok(RawBlock { label, pos, stmts })
    }

    fn parse_stmt(&mut self) -> Result<RawStmt> {
        let pos = self.pos();
        let (first, fpos) = self.expect_ident("instruction")?;
        // `dst = op ...` when an `=` follows the leading identifier.
        let (dst, op) = if matches!(self.peek(), Some(Tok::Assign)) {
            self.next();
            let (op, _) = self.expect_ident("operation after `=`")?;
            (Some((first, fpos)), op)
        } else {
            (None, first)
        };
        let mut args = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(_)) => {
                    let p = self.pos();
                    if let Some((Tok::Ident(s), _)) = self.next() {
                        args.push(Arg::Name(s, p));
                    }
                }
                Some(Tok::Int(_)) => {
                    let p = self.pos();
                    if let Some((Tok::Int(n), _)) = self.next() {
                        args.push(Arg::Int(n, p));
                    }
                }
                _ => break,
            }
        }
        Ok(RawStmt { dst, op, args, pos })
    }
}

// -- resolution and validation ------------------------------------------------

struct FuncResolver<'a> {
    program_funcs: &'a BTreeMap<String, (FuncId, usize)>, // name -> (id, param count)
    globals: &'a BTreeMap<String, GlobalId>,
    var_index: BTreeMap<String, VarId>,
    var_names: Vec<String>,
    func_name: String,
}

impl<'a> FuncResolver<'a> {
    fn var(&mut self, name: &str, pos: Pos) -> Result<VarId> {
        if self.globals.contains_key(name) || self.program_funcs.contains_key(name) {
            return Err(ParseError::new(
                pos,
                format!("`{name}` names a global or function and cannot be used as a variable"),
            ));
        }
        if let Some(v) = self.var_index.get(name) {
            return Ok(*v);
        }
        let id = VarId(self.var_names.len() as u32);
        self.var_index.insert(name.to_string(), id);
        self.var_names.push(name.to_string());
        Ok(id)
    }

    fn mem(&mut self, name: &str, pos: Pos) -> Result<MemRef> {
        if let Some(g) = self.globals.get(name) {
            return Ok(MemRef::Global(*g));
        }
        Ok(MemRef::Var(self.var(name, pos)?))
    }

    fn global(&self, name: &str, pos: Pos) -> Result<GlobalId> {
        self.globals.get(name).copied().ok_or_else(|| {
            ParseError::new(pos, format!("undefined reference to global `{name}`"))
        })
    }

    fn callee(&self, name: &str, pos: Pos) -> Result<(FuncId, usize)> {
        self.program_funcs.get(name).copied().ok_or_else(|| {
            ParseError::new(pos, format!("undefined reference to function `{name}`"))
        })
    }
}

fn arg_name(arg: &Arg) -> Result<(&str, Pos)> {
    match arg {
        Arg::Name(s, p) => Ok((s, *p)),
        Arg::Int(_, p) => Err(ParseError::new(*p, "expected a name operand")),
    }
}

fn arg_int(arg: &Arg) -> Result<(i64, Pos)> {
    match arg {
        Arg::Int(n, p) => Ok((*n, *p)),
        Arg::Name(_, p) => Err(ParseError::new(*p, "expected an integer operand")),
    }
}

fn check_arity(stmt: &RawStmt, n: usize) -> Result<()> {
    if stmt.args.len() != n {
        return Err(ParseError::new(
            stmt.pos,
            format!("`{}` takes {} operand(s), got {}", stmt.op, n, stmt.args.len()),
        ));
    }
    Ok(())
}

fn require_dst(stmt: &RawStmt) -> Result<(String, Pos)> {
    stmt.dst.clone().ok_or_else(|| {
        ParseError::new(stmt.pos, format!("`{}` produces a value and needs `dst = ...`", stmt.op))
    })
}

fn forbid_dst(stmt: &RawStmt) -> Result<()> {
    if stmt.dst.is_some() {
        return Err(ParseError::new(
            stmt.pos,
            format!("`{}` does not produce a value", stmt.op),
        ));
    }
    Ok(())
}

/// Parses, resolves, and validates a TIR program.
pub fn parse_program(text: &str) -> std::result::Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, at: 0 };
    let (entry_decl, raw_globals, raw_funcs) = parser.parse_items()?;
    if raw_funcs.is_empty() {
        return Err(ParseError::new(Pos { line: 1, col: 1 }, "program has no functions"));
    }

    let mut globals = Vec::new();
    let mut global_index: BTreeMap<String, GlobalId> = BTreeMap::new();
    for (name, len, is_array, pos) in raw_globals {
        if global_index.contains_key(&name) {
            return Err(ParseError::new(pos, format!("duplicate global `{name}`")));
        }
        global_index.insert(name.clone(), GlobalId(globals.len() as u32));
        globals.push(GlobalCell { name, len, is_array });
    }

    let mut func_sigs: BTreeMap<String, (FuncId, usize)> = BTreeMap::new();
    for (i, f) in raw_funcs.iter().enumerate() {
        if func_sigs.contains_key(&f.name) {
            return Err(ParseError::new(f.pos, format!("duplicate function `{}`", f.name)));
        }
        if global_index.contains_key(&f.name) {
            return Err(ParseError::new(
                f.pos,
                format!("function `{}` collides with a global of the same name", f.name),
            ));
        }
        func_sigs.insert(f.name.clone(), (FuncId(i as u32), f.params.len()));
    }

    let entry = match &entry_decl {
        Some((name, pos)) => {
            func_sigs
                .get(name)
                .map(|(id, _)| *id)
                .ok_or_else(|| {
                    ParseError::new(*pos, format!("undefined reference to function `{name}`"))
                })?
        }
        None => FuncId(0),
    };

    let mut functions = Vec::new();
    for raw in &raw_funcs {
        functions.push(resolve_func(raw, &func_sigs, &global_index)?);
    }

    let program = Program::new(functions, globals, entry);
    validate(&program, &raw_funcs)?;
    Ok(program)
}

fn resolve_func(
    raw: &RawFunc,
    func_sigs: &BTreeMap<String, (FuncId, usize)>,
    globals: &BTreeMap<String, GlobalId>,
) -> Result<Function> {
    let mut r = FuncResolver {
        program_funcs: func_sigs,
        globals,
        var_index: BTreeMap::new(),
        var_names: Vec::new(),
        func_name: raw.name.clone(),
    };
    for (p, pos) in &raw.params {
        if r.var_index.contains_key(p) {
            return Err(ParseError::new(
                *pos,
                format!("duplicate parameter `{p}` in function `{}`", raw.name),
            ));
        }
        r.var(p, *pos)?;
    }
    let param_count = raw.params.len() as u32;

    let mut label_index: BTreeMap<String, u32> = BTreeMap::new();
    for (i, b) in raw.blocks.iter().enumerate() {
        if label_index.contains_key(&b.label) {
            return Err(ParseError::new(
                b.pos,
                format!("duplicate block `{}` in function `{}`", b.label, raw.name),
            ));
        }
        label_index.insert(b.label.clone(), i as u32);
    }
    let entry_block = *label_index.get(&raw.entry_label).ok_or_else(|| {
        ParseError::new(
            raw.entry_pos,
            format!("undefined reference to block `{}`", raw.entry_label),
        )
    })?;

    let resolve_label = |name: &str, pos: Pos| -> Result<u32> {
        label_index.get(name).copied().ok_or_else(|| {
            ParseError::new(pos, format!("undefined reference to block `{name}`"))
        })
    };

    let mut blocks = Vec::new();
    for b in &raw.blocks {
        let mut instrs = Vec::new();
        let mut term: Option<Terminator> = None;
        for stmt in &b.stmts {
            if term.is_some() {
                return Err(ParseError::new(
                    stmt.pos,
                    format!("statement after terminator in block `{}`", b.label),
                ));
            }
            match stmt.op.as_str() {
                "br" => {
                    forbid_dst(stmt)?;
                    check_arity(stmt, 1)?;
                    let (l, p) = arg_name(&stmt.args[0])?;
                    term = Some(Terminator::Br { target: resolve_label(l, p)? });
                }
                "brcond" => {
                    forbid_dst(stmt)?;
                    check_arity(stmt, 3)?;
                    let (c, cp) = arg_name(&stmt.args[0])?;
                    let (t, tp) = arg_name(&stmt.args[1])?;
                    let (e, ep) = arg_name(&stmt.args[2])?;
                    term = Some(Terminator::BrCond {
                        cond: r.var(c, cp)?,
                        then_blk: resolve_label(t, tp)?,
                        else_blk: resolve_label(e, ep)?,
                    });
                }
                "ret" => {
                    forbid_dst(stmt)?;
                    if stmt.args.len() > 1 {
                        return Err(ParseError::new(stmt.pos, "`ret` takes at most one operand"));
                    }
                    let value = match stmt.args.first() {
                        Some(a) => {
                            let (v, p) = arg_name(a)?;
                            Some(r.var(v, p)?)
                        }
                        None => None,
                    };
                    term = Some(Terminator::Ret { value });
                }
                "trap" => {
                    forbid_dst(stmt)?;
                    check_arity(stmt, 0)?;
                    term = Some(Terminator::Trap);
                }
                _ => instrs.push(resolve_instr(&mut r, stmt)?),
            }
        }
        let term = term.ok_or_else(|| {
            ParseError::new(b.pos, format!("block `{}` has no terminator", b.label))
        })?;
        blocks.push(BasicBlock { label: b.label.clone(), instrs, term });
    }

    Ok(Function::new(r.func_name.clone(), param_count, r.var_names, blocks, entry_block))
}

fn resolve_instr(r: &mut FuncResolver, stmt: &RawStmt) -> Result<Instr> {
    match stmt.op.as_str() {
        "const" => {
            let (d, dp) = require_dst(stmt)?;
            check_arity(stmt, 1)?;
            let (value, _) = arg_int(&stmt.args[0])?;
            Ok(Instr::Const { dst: r.var(&d, dp)?, value })
        }
        "input" => {
            let (d, dp) = require_dst(stmt)?;
            check_arity(stmt, 1)?;
            let (n, np) = arg_int(&stmt.args[0])?;
            if n < 0 {
                return Err(ParseError::new(np, "input offset must be non-negative"));
            }
            Ok(Instr::Input { dst: r.var(&d, dp)?, offset: n as u32 })
        }
        "binop" => {
            let (d, dp) = require_dst(stmt)?;
            check_arity(stmt, 3)?;
            let (opname, opp) = arg_name(&stmt.args[0])?;
            let op = match opname {
                "add" => BinOp::Add,
                "sub" => BinOp::Sub,
                "mul" => BinOp::Mul,
                "div" => BinOp::Div,
                "lt" => BinOp::Lt,
                "eq" => BinOp::Eq,
                "and" => BinOp::And,
                "or" => BinOp::Or,
                other => {
                    return Err(ParseError::new(opp, format!("unknown binop `{other}`")))
                }
            };
            let (a, ap) = arg_name(&stmt.args[1])?;
            let (b, bp) = arg_name(&stmt.args[2])?;
            Ok(Instr::BinOp {
                dst: r.var(&d, dp)?,
                op,
                lhs: r.var(a, ap)?,
                rhs: r.var(b, bp)?,
            })
        }
        "load" => {
            let (d, dp) = require_dst(stmt)?;
            check_arity(stmt, 1)?;
            let (s, sp) = arg_name(&stmt.args[0])?;
            Ok(Instr::Load { dst: r.var(&d, dp)?, src: r.mem(s, sp)? })
        }
        "store" => {
            forbid_dst(stmt)?;
            check_arity(stmt, 2)?;
            let (dst, dstp) = arg_name(&stmt.args[0])?;
            let (v, vp) = arg_name(&stmt.args[1])?;
            Ok(Instr::Store { dst: r.mem(dst, dstp)?, value: r.var(v, vp)? })
        }
        "addr" => {
            let (d, dp) = require_dst(stmt)?;
            check_arity(stmt, 1)?;
            let (g, gp) = arg_name(&stmt.args[0])?;
            Ok(Instr::Addr { dst: r.var(&d, dp)?, global: r.global(g, gp)? })
        }
        "funcaddr" => {
            let (d, dp) = require_dst(stmt)?;
            check_arity(stmt, 1)?;
            let (f, fp) = arg_name(&stmt.args[0])?;
            Ok(Instr::FuncAddr { dst: r.var(&d, dp)?, func: r.callee(f, fp)?.0 })
        }
        "call" => {
            if stmt.args.is_empty() {
                return Err(ParseError::new(stmt.pos, "`call` needs a callee"));
            }
            let (f, fp) = arg_name(&stmt.args[0])?;
            let (callee, param_count) = r.callee(f, fp)?;
            let mut args = Vec::new();
            for a in &stmt.args[1..] {
                let (v, p) = arg_name(a)?;
                args.push(r.var(v, p)?);
            }
            if args.len() != param_count {
                return Err(ParseError::new(
                    stmt.pos,
                    format!(
                        "call to `{f}` passes {} argument(s), function takes {param_count}",
                        args.len()
                    ),
                ));
            }
            let dst = match &stmt.dst {
                Some((d, dp)) => Some(r.var(d, *dp)?),
                None => None,
            };
            Ok(Instr::Call { dst, callee, args })
        }
        "call_indirect" => {
            if stmt.args.is_empty() {
                return Err(ParseError::new(stmt.pos, "`call_indirect` needs a callee operand"));
            }
            let (c, cp) = arg_name(&stmt.args[0])?;
            let callee = r.var(c, cp)?;
            let mut args = Vec::new();
            for a in &stmt.args[1..] {
                let (v, p) = arg_name(a)?;
                args.push(r.var(v, p)?);
            }
            let dst = match &stmt.dst {
                Some((d, dp)) => Some(r.var(d, *dp)?),
                None => None,
            };
            Ok(Instr::CallIndirect { dst, callee, args })
        }
        "aload" => {
            let (d, dp) = require_dst(stmt)?;
            check_arity(stmt, 2)?;
            let (a, ap) = arg_name(&stmt.args[0])?;
            let (i, ip) = arg_name(&stmt.args[1])?;
            Ok(Instr::ALoad { dst: r.var(&d, dp)?, array: r.mem(a, ap)?, index: r.var(i, ip)? })
        }
        "astore" => {
            forbid_dst(stmt)?;
            check_arity(stmt, 3)?;
            let (a, ap) = arg_name(&stmt.args[0])?;
            let (i, ip) = arg_name(&stmt.args[1])?;
            let (v, vp) = arg_name(&stmt.args[2])?;
            Ok(Instr::AStore {
                array: r.mem(a, ap)?,
                index: r.var(i, ip)?,
                value: r.var(v, vp)?,
            })
        }
        "nop" => {
            forbid_dst(stmt)?;
            check_arity(stmt, 0)?;
            Ok(Instr::Nop)
        }
        other => Err(ParseError::new(stmt.pos, format!("unknown instruction `{other}`"))),
    }
}

/// Post-resolution checks: every block reachable from its function entry, and
/// every variable defined on all paths before use.
fn validate(program: &Program, raw: &[RawFunc]) -> Result<()> {
    for (fi, f) in program.functions.iter().enumerate() {
        let raw_f = &raw[fi];
        // Reachability: the validator rejects orphan blocks.
        let mut seen = vec![false; f.blocks.len()];
        let mut work = vec![f.entry_block];
        seen[f.entry_block as usize] = true;
        while let Some(b) = work.pop() {
            for s in f.successors(b) {
                if !seen[s as usize] {
                    seen[s as usize] = true;
                    work.push(s);
                }
            }
        }
        for (bi, ok) in seen.iter().enumerate() {
            if !ok {
                return Err(ParseError::new(
                    raw_f.blocks[bi].pos,
                    format!(
                        "block `{}` in function `{}` is unreachable from the entry block",
                        f.blocks[bi].label, f.name
                    ),
                ));
            }
        }
        definite_assignment(f, raw_f)?;
    }
    Ok(())
}

/// Forward must-be-defined dataflow; rejects any use of a variable that is
/// not defined on every path to it. Parameters count as defined.
fn definite_assignment(f: &Function, raw_f: &RawFunc) -> Result<()> {
    let nvars = f.var_names.len();
    let nblocks = f.blocks.len();
    let universe = vec![true; nvars];
    let mut entry_in = vec![false; nvars];
    entry_in[..f.param_count as usize].fill(true);
    let mut ins: Vec<Vec<bool>> = vec![universe.clone(); nblocks];
    ins[f.entry_block as usize] = entry_in;
    let preds = f.predecessors();
    loop {
        let mut changed = false;
        for b in 0..nblocks {
            if b == f.entry_block as usize {
                // Execution can always enter here fresh, so the entry IN set
                // stays exactly the parameters; definedness is never killed,
                // so back edges cannot shrink it either.
                continue;
            }
            let mut acc = universe.clone();
            for &p in &preds[b] {
                let out = block_out(f, p as usize, &ins[p as usize]);
                for (i, v) in acc.iter_mut().enumerate() {
                    *v = *v && out[i];
                }
            }
            if acc != ins[b] {
                ins[b] = acc;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for (bi, bb) in f.blocks.iter().enumerate() {
        let mut defined = ins[bi].clone();
        for (ii, instr) in bb.instrs.iter().enumerate() {
            for u in instr.uses() {
                if !defined[u.0 as usize] {
                    return Err(ParseError::new(
                        raw_f.blocks[bi].stmts[0].pos,
                        format!(
                            "variable `{}` may be used before definition in `{}:{}` (instruction {})",
                            f.var_name(u),
                            f.name,
                            bb.label,
                            ii
                        ),
                    ));
                }
            }
            if let Some(d) = instr.def() {
                defined[d.0 as usize] = true;
            }
        }
        for u in bb.term.uses() {
            if !defined[u.0 as usize] {
                return Err(ParseError::new(
                    raw_f.blocks[bi].stmts[0].pos,
                    format!(
                        "variable `{}` may be used before definition in terminator of `{}:{}`",
                        f.var_name(u),
                        f.name,
                        bb.label
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn block_out(f: &Function, b: usize, in_set: &[bool]) -> Vec<bool> {
    let mut out = in_set.to_vec();
    for instr in &f.blocks[b].instrs {
        if let Some(d) = instr.def() {
            out[d.0 as usize] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::pretty_print;

    const CHAIN: &str = r#"
# three-function call chain
func A(entry=A1) {
  block A1 { x = input 0 ; brcond x A2 A3 }
  block A2 { nop ; br A3 }
  block A3 { call B x ; br A4 }
  block A4 { ret }
}
func B(entry=B1, params=v) {
  block B1 { brcond v B4 B2 }
  block B2 { u = const 3 ; br B5 }
  block B5 { nop ; br B4 }
  block B4 { nop ; br B3 }
  block B3 { call C v ; br B6 }
  block B6 { ret }
}
func C(entry=C1, params=w) {
  block C1 { y = binop add w w ; brcond y C2 C3 }
  block C2 { nop ; br C1 }
  block C3 { c3 = const 1 ; brcond c3 C5 C4 }
  block C4 { p = const 0 ; call_indirect p ; br C5 }
  block C5 { ret }
}
"#;

    #[test]
    fn chain_fixture_parses_to_three_functions() {
        let p = parse_program(CHAIN).unwrap();
        assert_eq!(p.functions.len(), 3);
        assert_eq!(p.func(p.entry).name, "A");
    }

    #[test]
    fn undefined_branch_target_is_an_error() {
        let err = parse_program("func f(entry=b) { block b { br missing_block } }").unwrap_err();
        assert!(err.msg.contains("missing_block"), "{err}");
    }

    #[test]
    fn undefined_callee_is_an_error() {
        let err = parse_program("func f(entry=b) { block b { call g ; ret } }").unwrap_err();
        assert!(err.msg.contains("function `g`"), "{err}");
    }

    #[test]
    fn duplicate_names_are_errors() {
        assert!(parse_program("func f(entry=b) { block b { ret } }\nfunc f(entry=c) { block c { ret } }")
            .unwrap_err()
            .msg
            .contains("duplicate function"));
        assert!(parse_program("global g\nglobal g\nfunc f(entry=b) { block b { ret } }")
            .unwrap_err()
            .msg
            .contains("duplicate global"));
        assert!(parse_program("func f(entry=b) { block b { ret }\nblock b { ret } }")
            .unwrap_err()
            .msg
            .contains("duplicate block"));
    }

    #[test]
    fn unreachable_block_is_rejected() {
        let err = parse_program(
            "func f(entry=b) { block b { ret }\nblock orphan { ret } }",
        )
        .unwrap_err();
        assert!(err.msg.contains("orphan"), "{err}");
    }

    #[test]
    fn use_before_definition_is_rejected() {
        // `y` is defined only on one branch arm but used at the join.
        let src = "func f(entry=b0) {
            block b0 { c = input 0 ; brcond c b1 b2 }
            block b1 { y = const 1 ; br b3 }
            block b2 { nop ; br b3 }
            block b3 { z = binop add y y ; ret }
        }";
        let err = parse_program(src).unwrap_err();
        assert!(err.msg.contains("`y`"), "{err}");
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_program("func f(entry=b) {\n  block b { x = 5 ; ret }\n}").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.col > 0);
    }

    #[test]
    fn negative_input_offset_rejected() {
        let err =
            parse_program("func f(entry=b) { block b { x = input -1 ; ret } }").unwrap_err();
        assert!(err.msg.contains("non-negative"));
    }

    #[test]
    fn call_arity_is_checked() {
        let err = parse_program(
            "func f(entry=b) { block b { call g ; ret } }\nfunc g(entry=c, params=a) { block c { ret } }",
        )
        .unwrap_err();
        assert!(err.msg.contains("argument"), "{err}");
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let p1 = parse_program(CHAIN).unwrap();
        let text1 = pretty_print(&p1);
        let p2 = parse_program(&text1).unwrap();
        let text2 = pretty_print(&p2);
        assert_eq!(text1, text2);
    }

    #[test]
    fn diagnostics_are_deterministic() {
        let bad = "func f(entry=b) { block b { br nowhere } }";
        let a = parse_program(bad).unwrap_err();
        let b = parse_program(bad).unwrap_err();
        assert_eq!(a, b);
    }

    #[test]
    fn entry_directive_selects_entry_function() {
        let p = parse_program(
            "entry second\nfunc first(entry=b) { block b { ret } }\nfunc second(entry=c) { block c { ret } }",
        )
        .unwrap();
        assert_eq!(p.func(p.entry).name, "second");
        // and it survives printing
        let p2 = parse_program(&pretty_print(&p)).unwrap();
        assert_eq!(p2.func(p2.entry).name, "second");
    }
}
