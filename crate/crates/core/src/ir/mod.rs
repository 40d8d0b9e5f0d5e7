//! The TIR program model: functions, basic blocks, instructions, globals.
//!
//! Programs are immutable once parsed and validated, so every later stage
//! (analysis, slicing, distance, execution) can share them freely. Names are
//! interned to dense indices at parse time; the original spellings are kept
//! for printing and diagnostics.
//!
//! The textual grammar is documented in `docs/tir.md`.

mod parse;

pub use parse::{parse_program, ParseError};

use std::collections::BTreeMap;


/// Index of a function within a [`Program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncId(pub u32);

/// Index of a global cell within a [`Program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalId(pub u32);

/// Index of a variable within its function (parameters come first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

/// A basic block, identified by function and block index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId {
    pub func: FuncId,
    pub block: u32,
}

/// A stable instruction id: function, block, and position within the block.
/// `index == instrs.len()` addresses the block terminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstrId {
    pub block: BlockId,
    pub index: u32,
}

impl InstrId {
    pub fn func(&self) -> FuncId {
        self.block.func
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Eq,
    And,
    Or,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Lt => "lt",
            BinOp::Eq => "eq",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// First operand of the memory instructions: either a global named directly
/// or a variable holding an address produced by `addr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemRef {
    Global(GlobalId),
    Var(VarId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Const { dst: VarId, value: i64 },
    /// Read input byte `offset`; running past the end of the input ends the
    /// execution with an input-exhausted outcome.
    Input { dst: VarId, offset: u32 },
    BinOp { dst: VarId, op: BinOp, lhs: VarId, rhs: VarId },
    Load { dst: VarId, src: MemRef },
    Store { dst: MemRef, value: VarId },
    Addr { dst: VarId, global: GlobalId },
    FuncAddr { dst: VarId, func: FuncId },
    Call { dst: Option<VarId>, callee: FuncId, args: Vec<VarId> },
    CallIndirect { dst: Option<VarId>, callee: VarId, args: Vec<VarId> },
    ALoad { dst: VarId, array: MemRef, index: VarId },
    AStore { array: MemRef, index: VarId, value: VarId },
    Nop,
}

impl Instr {
    /// The variable this instruction defines, if any.
    pub fn def(&self) -> Option<VarId> {
        match *self {
            Instr::Const { dst, .. }
            | Instr::Input { dst, .. }
            | Instr::BinOp { dst, .. }
            | Instr::Load { dst, .. }
            | Instr::Addr { dst, .. }
            | Instr::FuncAddr { dst, .. }
            | Instr::ALoad { dst, .. } => Some(dst),
            Instr::Call { dst, .. } | Instr::CallIndirect { dst, .. } => dst,
            Instr::Store { .. } | Instr::AStore { .. } | Instr::Nop => None,
        }
    }

    /// Variables read by this instruction, in operand order.
    pub fn uses(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        let mut mem = |m: &MemRef| {
            if let MemRef::Var(v) = m {
                out.push(*v);
            }
        };
        match self {
            Instr::Const { .. } | Instr::Input { .. } | Instr::Nop => {}
            Instr::BinOp { lhs, rhs, .. } => {
                out.push(*lhs);
                out.push(*rhs);
            }
            Instr::Load { src, .. } => mem(src),
            Instr::Store { dst, value } => {
                mem(dst);
                out.push(*value);
            }
            Instr::Addr { .. } | Instr::FuncAddr { .. } => {}
            Instr::Call { args, .. } => out.extend(args.iter().copied()),
            Instr::CallIndirect { callee, args, .. } => {
                out.push(*callee);
                out.extend(args.iter().copied());
            }
            Instr::ALoad { array, index, .. } => {
                mem(array);
                out.push(*index);
            }
            Instr::AStore { array, index, value } => {
                mem(array);
                out.push(*index);
                out.push(*value);
            }
        }
        out
    }

    /// True for `call` and `call_indirect`.
    pub fn is_call(&self) -> bool {
        matches!(self, Instr::Call { .. } | Instr::CallIndirect { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Br { target: u32 },
    /// Jumps to `then_blk` when the condition is non-zero.
    BrCond { cond: VarId, then_blk: u32, else_blk: u32 },
    Ret { value: Option<VarId> },
    Trap,
}

impl Terminator {
    pub fn uses(&self) -> Vec<VarId> {
        match self {
            Terminator::BrCond { cond, .. } => vec![*cond],
            Terminator::Ret { value: Some(v) } => vec![*v],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub label: String,
    /// Non-terminator instructions; may be empty for blocks like `{ trap }`.
    pub instrs: Vec<Instr>,
    pub term: Terminator,
}

impl BasicBlock {
    /// Instruction count including the terminator slot.
    pub fn slot_count(&self) -> u32 {
        self.instrs.len() as u32 + 1
    }
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    /// Parameters occupy variable slots `0..param_count`.
    pub param_count: u32,
    pub var_names: Vec<String>,
    pub blocks: Vec<BasicBlock>,
    pub entry_block: u32,
    block_index: BTreeMap<String, u32>,
}

impl Function {
    pub fn new(
        name: String,
        param_count: u32,
        var_names: Vec<String>,
        blocks: Vec<BasicBlock>,
        entry_block: u32,
    ) -> Self {
        let block_index = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.label.clone(), i as u32))
            .collect();
        Function { name, param_count, var_names, blocks, entry_block, block_index }
    }

    pub fn block_by_label(&self, label: &str) -> Option<u32> {
        self.block_index.get(label).copied()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.var_names[v.0 as usize]
    }

    /// CFG successors of a block, in terminator order.
    pub fn successors(&self, block: u32) -> Vec<u32> {
        match &self.blocks[block as usize].term {
            Terminator::Br { target } => vec![*target],
            Terminator::BrCond { then_blk, else_blk, .. } => {
                if then_blk == else_blk {
                    vec![*then_blk]
                } else {
                    vec![*then_blk, *else_blk]
                }
            }
            Terminator::Ret { .. } | Terminator::Trap => Vec::new(),
        }
    }

    /// CFG predecessors, indexed by block.
    pub fn predecessors(&self) -> Vec<Vec<u32>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for b in 0..self.blocks.len() as u32 {
            for s in self.successors(b) {
                preds[s as usize].push(b);
            }
        }
        preds
    }
}

/// Shape of a global cell: a scalar is a single machine word, an array is a
/// fixed-size row of words with bounds-checked element access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalCell {
    pub name: String,
    pub len: u32,
    pub is_array: bool,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub functions: Vec<Function>,
    pub globals: Vec<GlobalCell>,
    pub entry: FuncId,
    func_index: BTreeMap<String, FuncId>,
    global_index: BTreeMap<String, GlobalId>,
}

impl Program {
    pub fn new(functions: Vec<Function>, globals: Vec<GlobalCell>, entry: FuncId) -> Self {
        let func_index = functions
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), FuncId(i as u32)))
            .collect();
        let global_index = globals
            .iter()
            .enumerate()
            .map(|(i, g)| (g.name.clone(), GlobalId(i as u32)))
            .collect();
        Program { functions, globals, entry, func_index, global_index }
    }

    pub fn func(&self, id: FuncId) -> &Function {
        &self.functions[id.0 as usize]
    }

    pub fn func_by_name(&self, name: &str) -> Option<FuncId> {
        self.func_index.get(name).copied()
    }

    pub fn global(&self, id: GlobalId) -> &GlobalCell {
        &self.globals[id.0 as usize]
    }

    pub fn global_by_name(&self, name: &str) -> Option<GlobalId> {
        self.global_index.get(name).copied()
    }

    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.func(id.func).blocks[id.block as usize]
    }

    /// All block ids in program order.
    pub fn all_blocks(&self) -> Vec<BlockId> {
        let mut out = Vec::new();
        for (fi, f) in self.functions.iter().enumerate() {
            for b in 0..f.blocks.len() as u32 {
                out.push(BlockId { func: FuncId(fi as u32), block: b });
            }
        }
        out
    }

    pub fn block_name(&self, id: BlockId) -> String {
        let f = self.func(id.func);
        format!("{}:{}", f.name, f.blocks[id.block as usize].label)
    }

    pub fn instr_name(&self, id: InstrId) -> String {
        format!("{}:{}", self.block_name(id.block), id.index)
    }

    /// The instruction at `id`, or `None` when `id` addresses the terminator.
    pub fn instr(&self, id: InstrId) -> Option<&Instr> {
        self.block(id.block).instrs.get(id.index as usize)
    }
}

/// One element of a target's data set: a variable in the target function or a
/// global cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Datum {
    Var(FuncId, VarId),
    Global(GlobalId),
}

/// A resolved fuzzing target: an instruction plus the data it touches.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub location: InstrId,
    pub data: Vec<Datum>,
}

impl TargetSpec {
    pub fn block(&self) -> BlockId {
        self.location.block
    }

    pub fn func(&self) -> FuncId {
        self.location.block.func
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TargetError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown block `{block}` in function `{func}`")]
    UnknownBlock { func: String, block: String },
    #[error("instruction index {index} out of range for block `{func}:{block}` (max {max})")]
    IndexOutOfRange { func: String, block: String, index: u32, max: u32 },
    #[error("malformed target spec `{0}`: expected `func:block[:index]`")]
    Malformed(String),
}

/// Resolves a textual `func:block[:index]` target. When the index is omitted
/// it defaults to the block's last non-terminator instruction, falling back
/// to the terminator slot for instruction-less blocks.
pub fn resolve_target(program: &Program, spec: &str) -> Result<TargetSpec, TargetError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 2 || parts.len() > 3 || parts[0].is_empty() || parts[1].is_empty() {
        return Err(TargetError::Malformed(spec.to_string()));
    }
    let func_id = program
        .func_by_name(parts[0])
        .ok_or_else(|| TargetError::UnknownFunction(parts[0].to_string()))?;
    let func = program.func(func_id);
    let block = func.block_by_label(parts[1]).ok_or_else(|| TargetError::UnknownBlock {
        func: parts[0].to_string(),
        block: parts[1].to_string(),
    })?;
    let bb = &func.blocks[block as usize];
    let index = match parts.get(2) {
        Some(s) => {
            let idx: u32 = s.parse().map_err(|_| TargetError::Malformed(spec.to_string()))?;
            if idx >= bb.slot_count() {
                return Err(TargetError::IndexOutOfRange {
                    func: parts[0].to_string(),
                    block: parts[1].to_string(),
                    index: idx,
                    max: bb.slot_count() - 1,
                });
            }
            idx
        }
        None => {
            if bb.instrs.is_empty() {
                bb.instrs.len() as u32 // the terminator slot
            } else {
                bb.instrs.len() as u32 - 1
            }
        }
    };
    let location = InstrId { block: BlockId { func: func_id, block }, index };
    let data = target_data(program, location);
    Ok(TargetSpec { location, data })
}

/// The variable/global operands read or written at an instruction, in a
/// stable order without duplicates.
fn target_data(program: &Program, id: InstrId) -> Vec<Datum> {
    let f = id.block.func;
    let bb = program.block(id.block);
    let mut data: Vec<Datum> = Vec::new();
    let push = |d: Datum, data: &mut Vec<Datum>| {
        if !data.contains(&d) {
            data.push(d);
        }
    };
    let push_var = |v: VarId, data: &mut Vec<Datum>| push(Datum::Var(f, v), data);
    match bb.instrs.get(id.index as usize) {
        Some(instr) => {
            if let Some(d) = instr.def() {
                push_var(d, &mut data);
            }
            for u in instr.uses() {
                push_var(u, &mut data);
            }
            let mem = |m: &MemRef, data: &mut Vec<Datum>| {
                if let MemRef::Global(g) = m {
                    push(Datum::Global(*g), data);
                }
            };
            match instr {
                Instr::Load { src, .. } => mem(src, &mut data),
                Instr::Store { dst, .. } => mem(dst, &mut data),
                Instr::ALoad { array, .. } => mem(array, &mut data),
                Instr::AStore { array, .. } => mem(array, &mut data),
                Instr::Addr { global, .. } => push(Datum::Global(*global), &mut data),
                _ => {}
            }
        }
        None => {
            for u in bb.term.uses() {
                push_var(u, &mut data);
            }
        }
    }
    data
}

/// Canonical text form. `parse(print(p))` reproduces `p` and printing is a
/// fixed point of parse-then-print.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    let entry_name = &program.func(program.entry).name;
    if program.entry.0 != 0 {
        out.push_str(&format!("entry {entry_name}\n"));
    }
    for g in &program.globals {
        if g.is_array {
            out.push_str(&format!("global {}[{}]\n", g.name, g.len));
        } else {
            out.push_str(&format!("global {}\n", g.name));
        }
    }
    for f in &program.functions {
        let entry = &f.blocks[f.entry_block as usize].label;
        if f.param_count == 0 {
            out.push_str(&format!("func {}(entry={}) {{\n", f.name, entry));
        } else {
            let params: Vec<&str> =
                (0..f.param_count).map(|i| f.var_name(VarId(i))).collect();
            out.push_str(&format!(
                "func {}(entry={}, params={}) {{\n",
                f.name,
                entry,
                params.join(" ")
            ));
        }
        for b in &f.blocks {
            out.push_str(&format!("  block {} {{\n", b.label));
            for i in &b.instrs {
                out.push_str(&format!("    {}\n", print_instr(program, f, i)));
            }
            out.push_str(&format!("    {}\n", print_term(f, &b.term)));
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    out
}

fn print_mem(program: &Program, f: &Function, m: &MemRef) -> String {
    match m {
        MemRef::Global(g) => program.global(*g).name.clone(),
        MemRef::Var(v) => f.var_name(*v).to_string(),
    }
}

fn print_instr(program: &Program, f: &Function, i: &Instr) -> String {
    let v = |x: &VarId| f.var_name(*x).to_string();
    match i {
        Instr::Const { dst, value } => format!("{} = const {}", v(dst), value),
        Instr::Input { dst, offset } => format!("{} = input {}", v(dst), offset),
        Instr::BinOp { dst, op, lhs, rhs } => {
            format!("{} = binop {} {} {}", v(dst), op.name(), v(lhs), v(rhs))
        }
        Instr::Load { dst, src } => format!("{} = load {}", v(dst), print_mem(program, f, src)),
        Instr::Store { dst, value } => {
            format!("store {}, {}", print_mem(program, f, dst), v(value))
        }
        Instr::Addr { dst, global } => {
            format!("{} = addr {}", v(dst), program.global(*global).name)
        }
        Instr::FuncAddr { dst, func } => {
            format!("{} = funcaddr {}", v(dst), program.func(*func).name)
        }
        Instr::Call { dst, callee, args } => {
            let mut s = String::new();
            if let Some(d) = dst {
                s.push_str(&format!("{} = ", v(d)));
            }
            s.push_str(&format!("call {}", program.func(*callee).name));
            for a in args {
                s.push_str(&format!(" {}", v(a)));
            }
            s
        }
        Instr::CallIndirect { dst, callee, args } => {
            let mut s = String::new();
            if let Some(d) = dst {
                s.push_str(&format!("{} = ", v(d)));
            }
            s.push_str(&format!("call_indirect {}", v(callee)));
            for a in args {
                s.push_str(&format!(" {}", v(a)));
            }
            s
        }
        Instr::ALoad { dst, array, index } => {
            format!("{} = aload {} {}", v(dst), print_mem(program, f, array), v(index))
        }
        Instr::AStore { array, index, value } => {
            format!("astore {}, {}, {}", print_mem(program, f, array), v(index), v(value))
        }
        Instr::Nop => "nop".to_string(),
    }
}

fn print_term(f: &Function, t: &Terminator) -> String {
    let label = |b: &u32| f.blocks[*b as usize].label.clone();
    match t {
        Terminator::Br { target } => format!("br {}", label(target)),
        Terminator::BrCond { cond, then_blk, else_blk } => {
            format!("brcond {} {} {}", f.var_name(*cond), label(then_blk), label(else_blk))
        }
        Terminator::Ret { value: Some(v) } => format!("ret {}", f.var_name(*v)),
        Terminator::Ret { value: None } => "ret".to_string(),
        Terminator::Trap => "trap".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Program {
        parse_program("func main(entry=b) { block b { trap } }").unwrap()
    }

    #[test]
    fn trap_only_block_parses() {
        let p = minimal();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.functions[0].blocks.len(), 1);
        assert!(p.functions[0].blocks[0].instrs.is_empty());
        assert_eq!(p.functions[0].blocks[0].term, Terminator::Trap);
    }

    #[test]
    fn target_on_pure_terminator_has_empty_data() {
        let p = minimal();
        let t = resolve_target(&p, "main:b").unwrap();
        assert_eq!(t.location.index, 0);
        assert!(t.data.is_empty());
    }

    #[test]
    fn target_index_defaults_to_last_instruction() {
        let p = parse_program(
            "func main(entry=b) { block b { x = const 1 ; y = const 2 ; ret } }",
        )
        .unwrap();
        let t = resolve_target(&p, "main:b").unwrap();
        assert_eq!(t.location.index, 1);
        assert_eq!(t.data, vec![Datum::Var(FuncId(0), VarId(1))]);
    }

    #[test]
    fn target_errors() {
        let p = minimal();
        assert_eq!(
            resolve_target(&p, "main:zz").unwrap_err(),
            TargetError::UnknownBlock { func: "main".into(), block: "zz".into() }
        );
        assert!(matches!(
            resolve_target(&p, "nosuch:b"),
            Err(TargetError::UnknownFunction(_))
        ));
        assert!(matches!(
            resolve_target(&p, "main:b:7"),
            Err(TargetError::IndexOutOfRange { .. })
        ));
        assert!(matches!(resolve_target(&p, "main"), Err(TargetError::Malformed(_))));
    }

    #[test]
    fn aload_target_data_covers_array_index_and_result() {
        let p = parse_program(
            "global arr[8]\n\
             func main(entry=b) { block b { i = input 0 ; x = aload arr i ; ret } }",
        )
        .unwrap();
        let t = resolve_target(&p, "main:b:1").unwrap();
        let f = FuncId(0);
        assert!(t.data.contains(&Datum::Var(f, VarId(1)))); // x
        assert!(t.data.contains(&Datum::Var(f, VarId(0)))); // i
        assert!(t.data.contains(&Datum::Global(GlobalId(0)))); // arr
    }
}
