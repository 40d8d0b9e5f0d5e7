//! Execution of TIR programs under an instrumentation plan.
//!
//! The interpreter is a plain frame-stack machine over 64-bit two's-complement
//! integers plus opaque address values. Instrumentation observes block entries
//! and never perturbs execution, so outcomes are identical under any plan.

use std::collections::{BTreeMap, BTreeSet};

use crate::distance::CombinedDistances;
use crate::hash::stable_hash64;
use crate::ir::{
    BlockId, FuncId, GlobalId, Instr, InstrId, MemRef, Program, Terminator, VarId,
};
use crate::slicing::SliceSet;
use crate::valueflow::VfbMap;

pub const DEFAULT_BITMAP_SIZE: usize = 65536;

/// Which blocks report which feedback channel.
#[derive(Debug, Clone)]
pub struct InstrumentationPlan {
    /// Slice-coverage channel.
    pub coverage_blocks: BTreeSet<BlockId>,
    /// Distance channel: boundary blocks with their combined distances.
    pub boundary: BTreeMap<BlockId, f64>,
    /// Value-flow channel: blocks with a VFB score.
    pub vfb: BTreeMap<BlockId, f64>,
    pub bitmap_size: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("bitmap size {0} is not a power of two")]
    BitmapSize(usize),
}

impl InstrumentationPlan {
    pub fn bitmap_index(&self, block: BlockId) -> usize {
        bitmap_index(block, self.bitmap_size)
    }
}

/// Stable bitmap slot for a block.
pub fn bitmap_index(block: BlockId, bitmap_size: usize) -> usize {
    let mut key = [0u8; 8];
    key[..4].copy_from_slice(&block.func.0.to_le_bytes());
    key[4..].copy_from_slice(&block.block.to_le_bytes());
    (stable_hash64(&key) % bitmap_size as u64) as usize
}

/// Builds the selective plan from the analysis products. Boundary blocks
/// without a defined combined distance are dropped and reported.
pub fn build_plan(
    slice: &SliceSet,
    boundary: &BTreeSet<BlockId>,
    vfb: &VfbMap,
    distances: &CombinedDistances,
    bitmap_size: usize,
) -> Result<(InstrumentationPlan, Vec<String>), PlanError> {
    if bitmap_size == 0 || !bitmap_size.is_power_of_two() {
        return Err(PlanError::BitmapSize(bitmap_size));
    }
    let mut diagnostics = Vec::new();
    let mut bmap = BTreeMap::new();
    for &b in boundary {
        match distances.get(&b) {
            Some(&d) => {
                bmap.insert(b, d);
            }
            None => diagnostics.push(format!(
                "boundary block {:?}:{} has no combined distance; dropped from the distance channel",
                b.func.0, b.block
            )),
        }
    }
    let plan = InstrumentationPlan {
        coverage_blocks: slice.blocks.keys().copied().collect(),
        boundary: bmap,
        vfb: vfb.clone(),
        bitmap_size,
    };
    Ok((plan, diagnostics))
}

/// The full-instrumentation variant: every block reports coverage and every
/// block with a defined combined distance reports distance.
pub fn full_plan(
    program: &Program,
    vfb: &VfbMap,
    distances: &CombinedDistances,
    bitmap_size: usize,
) -> Result<InstrumentationPlan, PlanError> {
    if bitmap_size == 0 || !bitmap_size.is_power_of_two() {
        return Err(PlanError::BitmapSize(bitmap_size));
    }
    Ok(InstrumentationPlan {
        coverage_blocks: program.all_blocks().into_iter().collect(),
        boundary: distances.clone(),
        vfb: vfb.clone(),
        bitmap_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrashKind {
    Trap,
    ArrayBounds,
    DivByZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecOutcome {
    Ok,
    Crash { kind: CrashKind, location: InstrId },
    StepLimit,
    InputExhausted,
}

impl ExecOutcome {
    pub fn is_crash(&self) -> bool {
        matches!(self, ExecOutcome::Crash { .. })
    }
}

/// One execution's feedback record. The coverage bitmap holds AFL-style
/// bucketized hit counts; distance aggregates run over *distinct* boundary
/// blocks while vfs accumulates per block execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionFeedback {
    pub bitmap: Vec<u8>,
    pub boundary_hits: BTreeSet<BlockId>,
    pub distance_sum: f64,
    pub distance_count: u32,
    pub vfs_sum: f64,
    pub exec_steps: u64,
}

impl ExecutionFeedback {
    /// Mean combined distance over the distinct boundary blocks hit.
    pub fn seed_distance(&self) -> Option<f64> {
        if self.distance_count == 0 {
            None
        } else {
            Some(self.distance_sum / self.distance_count as f64)
        }
    }

    /// Number of occupied bitmap slots, the coverage measure used for energy.
    pub fn covered_slots(&self) -> u32 {
        self.bitmap.iter().filter(|&&b| b != 0).count() as u32
    }
}

/// AFL's 8-bucket hit-count quantization.
pub fn classify_count(count: u32) -> u8 {
    match count {
        0 => 0,
        1 => 1,
        2 => 2,
        3 => 4,
        4..=7 => 8,
        8..=15 => 16,
        16..=31 => 32,
        32..=127 => 64,
        _ => 128,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    Int(i64),
    Addr(GlobalId),
    Func(FuncId),
}

impl Value {
    fn truthy(self) -> bool {
        self != Value::Int(0)
    }
}

struct Frame {
    func: FuncId,
    block: u32,
    index: usize,
    locals: Vec<Value>,
    ret_dst: Option<VarId>,
}

struct Machine<'a> {
    program: &'a Program,
    plan: &'a InstrumentationPlan,
    input: &'a [u8],
    globals: Vec<Vec<Value>>,
    counts: Vec<u32>,
    boundary_hits: BTreeSet<BlockId>,
    vfs_sum: f64,
    steps: u64,
    step_limit: u64,
    trace: Option<Vec<BlockId>>,
}

enum StepEnd {
    Done(ExecOutcome),
    Continue,
}

impl<'a> Machine<'a> {
    fn enter_block(&mut self, id: BlockId) {
        if let Some(t) = &mut self.trace {
            t.push(id);
        }
        if self.plan.coverage_blocks.contains(&id) {
            let idx = self.plan.bitmap_index(id);
            self.counts[idx] = self.counts[idx].saturating_add(1);
        }
        if self.plan.boundary.contains_key(&id) {
            self.boundary_hits.insert(id);
        }
        if let Some(&score) = self.plan.vfb.get(&id) {
            self.vfs_sum += score;
        }
    }

    fn mem_target(&self, frame: &Frame, mem: &MemRef) -> Option<GlobalId> {
        match mem {
            MemRef::Global(g) => Some(*g),
            MemRef::Var(v) => match frame.locals[v.0 as usize] {
                Value::Addr(g) => Some(g),
                _ => None,
            },
        }
    }

    fn run(&mut self, entry: FuncId) -> ExecOutcome {
        let entry_fn = self.program.func(entry);
        let mut stack = vec![Frame {
            func: entry,
            block: entry_fn.entry_block,
            index: 0,
            locals: vec![Value::Int(0); entry_fn.var_names.len()],
            ret_dst: None,
        }];
        self.enter_block(BlockId { func: entry, block: entry_fn.entry_block });
        loop {
            match self.step(&mut stack) {
                StepEnd::Done(outcome) => return outcome,
                StepEnd::Continue => {}
            }
        }
    }

    fn step(&mut self, stack: &mut Vec<Frame>) -> StepEnd {
        self.steps += 1;
        if self.steps > self.step_limit {
            return StepEnd::Done(ExecOutcome::StepLimit);
        }
        let frame = stack.last_mut().expect("non-empty call stack");
        let func = self.program.func(frame.func);
        let bb = &func.blocks[frame.block as usize];
        let here = InstrId {
            block: BlockId { func: frame.func, block: frame.block },
            index: frame.index as u32,
        };
        // fault: an operand held a value of the wrong runtime kind
        let fault = ExecOutcome::Crash { kind: CrashKind::Trap, location: here };

        if frame.index == bb.instrs.len() {
            // terminator slot
            return match &bb.term {
                Terminator::Br { target } => {
                    frame.block = *target;
                    frame.index = 0;
                    self.enter_block(BlockId { func: frame.func, block: *target });
                    StepEnd::Continue
                }
                Terminator::BrCond { cond, then_blk, else_blk } => {
                    let taken = if frame.locals[cond.0 as usize].truthy() {
                        *then_blk
                    } else {
                        *else_blk
                    };
                    frame.block = taken;
                    frame.index = 0;
                    self.enter_block(BlockId { func: frame.func, block: taken });
                    StepEnd::Continue
                }
                Terminator::Ret { value } => {
                    let rv = value.map(|v| frame.locals[v.0 as usize]);
                    let ret_dst = frame.ret_dst;
                    stack.pop();
                    match stack.last_mut() {
                        None => StepEnd::Done(ExecOutcome::Ok),
                        Some(caller) => {
                            if let Some(d) = ret_dst {
                                caller.locals[d.0 as usize] = rv.unwrap_or(Value::Int(0));
                            }
                            StepEnd::Continue
                        }
                    }
                }
                Terminator::Trap => StepEnd::Done(ExecOutcome::Crash {
                    kind: CrashKind::Trap,
                    location: here,
                }),
            };
        }

        let instr = &bb.instrs[frame.index];
        frame.index += 1;
        match instr {
            Instr::Const { dst, value } => {
                frame.locals[dst.0 as usize] = Value::Int(*value);
            }
            Instr::Input { dst, offset } => match self.input.get(*offset as usize) {
                Some(&b) => frame.locals[dst.0 as usize] = Value::Int(b as i64),
                None => return StepEnd::Done(ExecOutcome::InputExhausted),
            },
            Instr::BinOp { dst, op, lhs, rhs } => {
                use crate::ir::BinOp::*;
                let l = frame.locals[lhs.0 as usize];
                let r = frame.locals[rhs.0 as usize];
                if *op == Eq {
                    frame.locals[dst.0 as usize] = Value::Int((l == r) as i64);
                } else {
                    let (Value::Int(a), Value::Int(b)) = (l, r) else {
                        return StepEnd::Done(fault);
                    };
                    let out = match op {
                        Add => a.wrapping_add(b),
                        Sub => a.wrapping_sub(b),
                        Mul => a.wrapping_mul(b),
                        Div => {
                            if b == 0 {
                                return StepEnd::Done(ExecOutcome::Crash {
                                    kind: CrashKind::DivByZero,
                                    location: here,
                                });
                            }
                            a.wrapping_div(b)
                        }
                        Lt => (a < b) as i64,
                        And => a & b,
                        Or => a | b,
                        Eq => unreachable!(),
                    };
                    frame.locals[dst.0 as usize] = Value::Int(out);
                }
            }
            Instr::Load { dst, src } => {
                let Some(g) = self.mem_target(frame, src) else {
                    return StepEnd::Done(fault);
                };
                frame.locals[dst.0 as usize] = self.globals[g.0 as usize][0];
            }
            Instr::Store { dst, value } => {
                let Some(g) = self.mem_target(frame, dst) else {
                    return StepEnd::Done(fault);
                };
                self.globals[g.0 as usize][0] = frame.locals[value.0 as usize];
            }
            Instr::Addr { dst, global } => {
                frame.locals[dst.0 as usize] = Value::Addr(*global);
            }
            Instr::FuncAddr { dst, func } => {
                frame.locals[dst.0 as usize] = Value::Func(*func);
            }
            Instr::ALoad { dst, array, index } => {
                let Some(g) = self.mem_target(frame, array) else {
                    return StepEnd::Done(fault);
                };
                let Value::Int(i) = frame.locals[index.0 as usize] else {
                    return StepEnd::Done(fault);
                };
                let cells = &self.globals[g.0 as usize];
                if i < 0 || i as usize >= cells.len() {
                    return StepEnd::Done(ExecOutcome::Crash {
                        kind: CrashKind::ArrayBounds,
                        location: here,
                    });
                }
                frame.locals[dst.0 as usize] = cells[i as usize];
            }
            Instr::AStore { array, index, value } => {
                let Some(g) = self.mem_target(frame, array) else {
                    return StepEnd::Done(fault);
                };
                let Value::Int(i) = frame.locals[index.0 as usize] else {
                    return StepEnd::Done(fault);
                };
                let cells = &mut self.globals[g.0 as usize];
                if i < 0 || i as usize >= cells.len() {
                    return StepEnd::Done(ExecOutcome::Crash {
                        kind: CrashKind::ArrayBounds,
                        location: here,
                    });
                }
                cells[i as usize] = frame.locals[value.0 as usize];
            }
            Instr::Call { dst, callee, args } => {
                let frame_dst = *dst;
                let callee_id = *callee;
                let argv: Vec<Value> =
                    args.iter().map(|a| frame.locals[a.0 as usize]).collect();
                return self.push_call(stack, callee_id, argv, frame_dst, here);
            }
            Instr::CallIndirect { dst, callee, args } => {
                let Value::Func(target) = frame.locals[callee.0 as usize] else {
                    return StepEnd::Done(fault);
                };
                if args.len() != self.program.func(target).param_count as usize {
                    return StepEnd::Done(fault);
                }
                let frame_dst = *dst;
                let argv: Vec<Value> =
                    args.iter().map(|a| frame.locals[a.0 as usize]).collect();
                return self.push_call(stack, target, argv, frame_dst, here);
            }
            Instr::Nop => {}
        }
        StepEnd::Continue
    }

    fn push_call(
        &mut self,
        stack: &mut Vec<Frame>,
        callee: FuncId,
        args: Vec<Value>,
        ret_dst: Option<VarId>,
        _site: InstrId,
    ) -> StepEnd {
        let cf = self.program.func(callee);
        let mut locals = vec![Value::Int(0); cf.var_names.len()];
        for (i, v) in args.into_iter().enumerate().take(cf.param_count as usize) {
            locals[i] = v;
        }
        stack.push(Frame { func: callee, block: cf.entry_block, index: 0, locals, ret_dst });
        self.enter_block(BlockId { func: callee, block: cf.entry_block });
        StepEnd::Continue
    }

    fn into_feedback(self) -> (ExecutionFeedback, Option<Vec<BlockId>>) {
        let bitmap: Vec<u8> = self.counts.iter().map(|&c| classify_count(c)).collect();
        let mut distance_sum = 0.0;
        for b in &self.boundary_hits {
            distance_sum += self.plan.boundary[b];
        }
        (
            ExecutionFeedback {
                bitmap,
                distance_count: self.boundary_hits.len() as u32,
                boundary_hits: self.boundary_hits,
                distance_sum,
                vfs_sum: self.vfs_sum,
                exec_steps: self.steps,
            },
            self.trace,
        )
    }
}

fn run_machine(
    program: &Program,
    input: &[u8],
    plan: &InstrumentationPlan,
    step_limit: u64,
    want_trace: bool,
) -> (ExecOutcome, ExecutionFeedback, Option<Vec<BlockId>>) {
    assert!(step_limit > 0, "step limit must be positive");
    let mut m = Machine {
        program,
        plan,
        input,
        globals: program
            .globals
            .iter()
            .map(|g| vec![Value::Int(0); g.len as usize])
            .collect(),
        counts: vec![0; plan.bitmap_size],
        boundary_hits: BTreeSet::new(),
        vfs_sum: 0.0,
        steps: 0,
        step_limit,
        trace: want_trace.then(Vec::new),
    };
    let outcome = m.run(program.entry);
    let (feedback, trace) = m.into_feedback();
    (outcome, feedback, trace)
}

/// Deterministic execution: same (program, input, plan) gives identical
/// outcome and feedback.
pub fn execute(
    program: &Program,
    input: &[u8],
    plan: &InstrumentationPlan,
    step_limit: u64,
) -> (ExecOutcome, ExecutionFeedback) {
    let (o, f, _) = run_machine(program, input, plan, step_limit, false);
    (o, f)
}

/// Like [`execute`] but also records the sequence of blocks entered.
pub fn execute_with_trace(
    program: &Program,
    input: &[u8],
    plan: &InstrumentationPlan,
    step_limit: u64,
) -> (ExecOutcome, ExecutionFeedback, Vec<BlockId>) {
    let (o, f, t) = run_machine(program, input, plan, step_limit, true);
    (o, f, t.unwrap_or_default())
}
