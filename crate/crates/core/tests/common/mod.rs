//! Shared test support: a deterministic random-program generator and the
//! independent oracles the generative suites check against. Everything here
//! is deliberately written from the definitions, not by calling into the
//! code under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use tirfuzz::analysis::{CallGraph, ValueFlowGraph};
use tirfuzz::fuzzer::CampaignRng;
use tirfuzz::ir::{BlockId, FuncId, InstrId, Program, TargetSpec};
use tirfuzz::slicing::SliceSet;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> Program {
    let text = std::fs::read_to_string(fixture_path(name))
        .unwrap_or_else(|e| panic!("fixture {name}: {e}"));
    tirfuzz::ir::parse_program(&text).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn block_id(p: &Program, func: &str, label: &str) -> BlockId {
    let f = p.func_by_name(func).unwrap_or_else(|| panic!("no function {func}"));
    BlockId { func: f, block: p.func(f).block_by_label(label).unwrap() }
}

// ---------------------------------------------------------------------------
// random program generation
// ---------------------------------------------------------------------------

/// A generated program plus a target spec string pointing at a random block.
pub struct GenCase {
    pub text: String,
    pub target: String,
}

struct FnShape {
    name: String,
    params: usize,
    blocks: usize,
    succs: Vec<Vec<usize>>,
}

/// Generates a valid TIR program: up to 6 functions and 40 blocks, arbitrary
/// branch structure with loops, direct/indirect/recursive calls, and
/// multi-call blocks. Variables are only used after a definition in the same
/// block (or as parameters), which satisfies the validator on every path.
pub fn generate_case(rng: &mut CampaignRng) -> GenCase {
    let nfuncs = 1 + rng.below(6);
    let mut shapes = Vec::new();
    let mut total_blocks = 0usize;
    for i in 0..nfuncs {
        let want = 1 + rng.below(7);
        let blocks = want.min(40usize.saturating_sub(total_blocks)).max(1);
        total_blocks += blocks;
        let mut succs: Vec<Vec<usize>> = vec![Vec::new(); blocks];
        // spanning wiring keeps every block reachable from the entry
        for b in 1..blocks {
            let mut parent = rng.below(b);
            let mut guard = 0;
            while succs[parent].len() >= 2 && guard < 3 * blocks {
                parent = rng.below(b);
                guard += 1;
            }
            if succs[parent].len() >= 2 {
                parent = (0..b).find(|&p| succs[p].len() < 2).unwrap_or(b - 1);
            }
            succs[parent].push(b);
        }
        // extra edges create joins and loops
        for out in succs.iter_mut() {
            if out.len() < 2 && rng.chance(2, 5) {
                let to = rng.below(blocks);
                if !out.contains(&to) {
                    out.push(to);
                }
            }
        }
        shapes.push(FnShape {
            name: format!("f{i}"),
            params: rng.below(3),
            blocks,
            succs,
        });
    }

    let array_len = 4 + rng.below(60);
    let mut out = String::new();
    out.push_str("global gs\n");
    out.push_str(&format!("global ga[{array_len}]\n"));

    for shape in &shapes {
        let params: Vec<String> = (0..shape.params).map(|p| format!("p{p}")).collect();
        if params.is_empty() {
            out.push_str(&format!("func {}(entry=b0) {{\n", shape.name));
        } else {
            out.push_str(&format!(
                "func {}(entry=b0, params={}) {{\n",
                shape.name,
                params.join(" ")
            ));
        }
        let mut var = 0usize;
        for b in 0..shape.blocks {
            out.push_str(&format!("  block b{b} {{\n"));
            let mut defined: Vec<String> = params.clone();
            emit_def(rng, &mut out, &mut defined, &mut var);
            if rng.chance(1, 2) {
                emit_def(rng, &mut out, &mut defined, &mut var);
            }
            if defined.len() >= 2 && rng.chance(1, 2) {
                let ops = ["add", "sub", "mul", "lt", "and", "or", "eq"];
                let a = defined[rng.below(defined.len())].clone();
                let b2 = defined[rng.below(defined.len())].clone();
                let name = format!("v{var}");
                var += 1;
                out.push_str(&format!(
                    "    {name} = binop {} {a} {b2}\n",
                    ops[rng.below(ops.len())]
                ));
                defined.push(name);
            }
            if rng.chance(3, 10) {
                match rng.below(4) {
                    0 => {
                        let v = defined[rng.below(defined.len())].clone();
                        out.push_str(&format!("    store gs, {v}\n"));
                    }
                    1 => {
                        let name = format!("v{var}");
                        var += 1;
                        out.push_str(&format!("    {name} = load gs\n"));
                        defined.push(name);
                    }
                    2 => {
                        let i = defined[rng.below(defined.len())].clone();
                        let v = defined[rng.below(defined.len())].clone();
                        out.push_str(&format!("    astore ga, {i}, {v}\n"));
                    }
                    _ => {
                        let i = defined[rng.below(defined.len())].clone();
                        let name = format!("v{var}");
                        var += 1;
                        out.push_str(&format!("    {name} = aload ga {i}\n"));
                        defined.push(name);
                    }
                }
            }
            if nfuncs > 1 && rng.chance(7, 20) {
                emit_call(rng, &mut out, &mut defined, &mut var, &shapes);
                if rng.chance(1, 4) {
                    emit_call(rng, &mut out, &mut defined, &mut var, &shapes);
                }
            }
            match shape.succs[b].len() {
                0 => {
                    if rng.chance(1, 10) {
                        out.push_str("    trap\n");
                    } else if rng.chance(1, 3) {
                        let v = defined[rng.below(defined.len())].clone();
                        out.push_str(&format!("    ret {v}\n"));
                    } else {
                        out.push_str("    ret\n");
                    }
                }
                1 => out.push_str(&format!("    br b{}\n", shape.succs[b][0])),
                _ => {
                    let c = defined[rng.below(defined.len())].clone();
                    out.push_str(&format!(
                        "    brcond {c} b{} b{}\n",
                        shape.succs[b][0], shape.succs[b][1]
                    ));
                }
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }

    let tf = rng.below(shapes.len());
    let tb = rng.below(shapes[tf].blocks);
    GenCase { text: out, target: format!("f{tf}:b{tb}") }
}

fn emit_def(rng: &mut CampaignRng, out: &mut String, defined: &mut Vec<String>, var: &mut usize) {
    let name = format!("v{var}");
    *var += 1;
    if rng.chance(1, 2) {
        out.push_str(&format!("    {name} = input {}\n", rng.below(8)));
    } else {
        out.push_str(&format!("    {name} = const {}\n", rng.below(100)));
    }
    defined.push(name);
}

// direct, repeated, and indirect calls (self-calls included)
fn emit_call(
    rng: &mut CampaignRng,
    out: &mut String,
    defined: &mut Vec<String>,
    var: &mut usize,
    shapes: &[FnShape],
) {
    let callee = &shapes[rng.below(shapes.len())];
    let args: Vec<String> = (0..callee.params)
        .map(|_| defined[rng.below(defined.len())].clone())
        .collect();
    let argstr = if args.is_empty() {
        String::new()
    } else {
        format!(" {}", args.join(" "))
    };
    if rng.chance(1, 5) {
        let fp = format!("v{var}");
        *var += 1;
        out.push_str(&format!("    {fp} = funcaddr {}\n", callee.name));
        out.push_str(&format!("    call_indirect {fp}{argstr}\n"));
    } else if rng.chance(1, 3) {
        let name = format!("v{var}");
        *var += 1;
        out.push_str(&format!("    {name} = call {}{argstr}\n", callee.name));
        defined.push(name);
    } else {
        out.push_str(&format!("    call {}{argstr}\n", callee.name));
    }
}

// ---------------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------------

/// Explicit virtual ICFG shortest paths: unit intra-CFG edges plus unit
/// call-site -> callee-entry edges, no return edges; BFS toward the target
/// block over reversed edges.
pub fn icfg_distance_oracle(
    program: &Program,
    cg: &CallGraph,
    target: &TargetSpec,
) -> BTreeMap<BlockId, u32> {
    let mut rev: BTreeMap<BlockId, Vec<BlockId>> = BTreeMap::new();
    for (fi, func) in program.functions.iter().enumerate() {
        let f = FuncId(fi as u32);
        for b in 0..func.blocks.len() as u32 {
            let from = BlockId { func: f, block: b };
            for s in func.successors(b) {
                rev.entry(BlockId { func: f, block: s }).or_default().push(from);
            }
        }
    }
    for e in &cg.edges {
        let callee_entry = BlockId {
            func: e.callee,
            block: program.func(e.callee).entry_block,
        };
        rev.entry(callee_entry).or_default().push(e.site.block);
    }
    let mut dist = BTreeMap::from([(target.block(), 0u32)]);
    let mut work = VecDeque::from([target.block()]);
    while let Some(b) = work.pop_front() {
        let d = dist[&b];
        if let Some(preds) = rev.get(&b) {
            for &p in preds {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(p) {
                    e.insert(d + 1);
                    work.push_back(p);
                }
            }
        }
    }
    dist
}

/// Reverse BFS over a value-flow graph from a base node set; the oracle for
/// the VFD computation.
pub fn vfg_reverse_bfs_oracle(
    nodes: &[InstrId],
    edges: &[(InstrId, InstrId)],
    base: &BTreeSet<InstrId>,
) -> BTreeMap<InstrId, u32> {
    let mut rev: BTreeMap<InstrId, Vec<InstrId>> = BTreeMap::new();
    for (from, to) in edges {
        rev.entry(*to).or_default().push(*from);
    }
    let mut dist: BTreeMap<InstrId, u32> = BTreeMap::new();
    let mut work = VecDeque::new();
    for b in base {
        if nodes.contains(b) && !dist.contains_key(b) {
            dist.insert(*b, 0);
            work.push_back(*b);
        }
    }
    while let Some(n) = work.pop_front() {
        let d = dist[&n];
        if let Some(preds) = rev.get(&n) {
            for &p in preds {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(p) {
                    e.insert(d + 1);
                    work.push_back(p);
                }
            }
        }
    }
    dist
}

/// Direct evaluation of the boundary predicate over a slice: no successors,
/// or at least one successor outside the slice.
pub fn boundary_predicate_oracle(program: &Program, slice: &SliceSet) -> BTreeSet<BlockId> {
    let mut out = BTreeSet::new();
    for &b in slice.blocks.keys() {
        let succs = program.func(b.func).successors(b.block);
        if succs.is_empty()
            || succs
                .iter()
                .any(|&s| !slice.blocks.contains_key(&BlockId { func: b.func, block: s }))
        {
            out.insert(b);
        }
    }
    out
}

/// A random VFG over synthetic instruction ids, for the VFD oracle suite.
pub fn random_vfg(
    rng: &mut CampaignRng,
    max_nodes: usize,
) -> (Vec<InstrId>, Vec<(InstrId, InstrId)>, BTreeSet<InstrId>) {
    let n = 2 + rng.below(max_nodes - 1);
    let nodes: Vec<InstrId> = (0..n)
        .map(|i| InstrId {
            block: BlockId { func: FuncId(0), block: i as u32 },
            index: 0,
        })
        .collect();
    let mut edges = Vec::new();
    let nedges = rng.below(3 * n);
    for _ in 0..nedges {
        let a = nodes[rng.below(n)];
        let b = nodes[rng.below(n)];
        if a != b {
            edges.push((a, b));
        }
    }
    let mut base = BTreeSet::new();
    for _ in 0..1 + rng.below(2) {
        base.insert(nodes[rng.below(n)]);
    }
    (nodes, edges, base)
}

/// Builds a `ValueFlowGraph` from the synthetic parts.
pub fn vfg_from_parts(nodes: Vec<InstrId>, edges: &[(InstrId, InstrId)]) -> ValueFlowGraph {
    ValueFlowGraph::from_edges(nodes, edges)
}

/// Median of a sample (for the ablation benchmark).
pub fn median(values: &mut [u64]) -> u64 {
    values.sort_unstable();
    values[values.len() / 2]
}
