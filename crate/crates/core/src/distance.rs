//! Per-block control-flow distances to a target, computed backwards over a
//! virtual inter-procedural CFG that is never materialized: unit-weight
//! intra-CFG edges plus unit-weight call-site -> callee-entry edges, and no
//! return edges.
//!
//! The calculation runs in two phases. A function-level worklist propagates
//! entry-block distances backwards through call edges (a call site costs its
//! callee's entry distance plus one; a caller's entry costs the call site's
//! depth plus its distance). A final pass then walks each function's CFG in
//! reverse from every distance-carrying call site — and from the target block
//! in the target function — assigning `source distance + layer count` and
//! keeping the minimum.

use std::collections::{BTreeMap, VecDeque};

use crate::analysis::CallGraph;
use crate::ir::{BlockId, FuncId, Function, Program, TargetSpec};

/// Depths of a function's call-site blocks: shortest intra-CFG hop count from
/// the entry block, recorded only for blocks containing a call instruction.
pub type DepthMap = BTreeMap<u32, u32>;

/// Per-target integer distances; blocks with no path to the target are absent.
pub type BlockDistances = BTreeMap<BlockId, u32>;

/// Harmonically combined multi-target distances.
pub type CombinedDistances = BTreeMap<BlockId, f64>;

/// BFS depths of every block from the function entry.
fn block_depths(func: &Function) -> Vec<u32> {
    let mut depth = vec![u32::MAX; func.blocks.len()];
    depth[func.entry_block as usize] = 0;
    let mut work = VecDeque::from([func.entry_block]);
    while let Some(b) = work.pop_front() {
        for s in func.successors(b) {
            if depth[s as usize] == u32::MAX {
                depth[s as usize] = depth[b as usize] + 1;
                work.push_back(s);
            }
        }
    }
    depth
}

/// Depth of each call-site block (BFS from entry counts edges, so a call in
/// the entry block has depth 0).
pub fn call_site_depths(func: &Function) -> DepthMap {
    let depth = block_depths(func);
    let mut out = DepthMap::new();
    for (bi, bb) in func.blocks.iter().enumerate() {
        if bb.instrs.iter().any(|i| i.is_call()) {
            // The validator rejects unreachable blocks, so depth is defined.
            out.insert(bi as u32, depth[bi]);
        }
    }
    out
}

/// Shortest hop count from every block of `func` to the block `to`, walking
/// predecessor edges. Blocks that cannot reach `to` are absent.
fn reverse_layers(func: &Function, to: u32) -> BTreeMap<u32, u32> {
    let preds = func.predecessors();
    let mut layer = BTreeMap::from([(to, 0u32)]);
    let mut work = VecDeque::from([to]);
    while let Some(b) = work.pop_front() {
        let l = layer[&b];
        for &p in &preds[b as usize] {
            if let std::collections::btree_map::Entry::Vacant(slot) = layer.entry(p) {
                slot.insert(l + 1);
                work.push_back(p);
            }
        }
    }
    layer
}

/// Backward-stepping distance calculation for one target.
pub fn backward_step_distances(
    program: &Program,
    cg: &CallGraph,
    target: &TargetSpec,
) -> BlockDistances {
    let target_func = target.func();
    let depths: Vec<DepthMap> =
        program.functions.iter().map(call_site_depths).collect();

    // Entry-block distance per function. The target function's entry starts
    // at its intra-CFG distance to the target block, which the relaxation
    // below may still improve through recursive call chains.
    let mut entry_dist: BTreeMap<FuncId, u32> = BTreeMap::new();
    let mut site_dist: BTreeMap<BlockId, u32> = BTreeMap::new();

    let tf = program.func(target_func);
    let entry_layers = reverse_layers(tf, target.block().block);
    if let Some(&d) = entry_layers.get(&tf.entry_block) {
        entry_dist.insert(target_func, d);
    }

    let mut queue = VecDeque::from([target_func]);
    while let Some(callee) = queue.pop_front() {
        let callee_entry = match entry_dist.get(&callee) {
            Some(&d) => d,
            None => continue,
        };
        for e in cg.edges_into(callee) {
            let cs = e.site.block;
            let d = callee_entry + 1;
            let cur = site_dist.get(&cs).copied().unwrap_or(u32::MAX);
            if cur > d {
                site_dist.insert(cs, d);
            }
            let depth = depths[e.caller.0 as usize][&cs.block];
            let d2 = site_dist[&cs] + depth;
            let cur = entry_dist.get(&e.caller).copied().unwrap_or(u32::MAX);
            if cur > d2 {
                entry_dist.insert(e.caller, d2);
                queue.push_back(e.caller);
            }
        }
    }

    // Final pass: reverse BFS per function from every distance-carrying
    // source, keeping the minimum. Traversal never crosses function
    // boundaries; the call edges were already accounted for above.
    let mut out = BlockDistances::new();
    for (fi, func) in program.functions.iter().enumerate() {
        let f = FuncId(fi as u32);
        let mut sources: Vec<(u32, u32)> = site_dist
            .iter()
            .filter(|(b, _)| b.func == f)
            .map(|(b, &d)| (b.block, d))
            .collect();
        if f == target_func {
            sources.push((target.block().block, 0));
        }
        for (src, src_dist) in sources {
            for (b, layers) in reverse_layers(func, src) {
                let id = BlockId { func: f, block: b };
                let cand = src_dist + layers;
                let cur = out.get(&id).copied().unwrap_or(u32::MAX);
                if cand < cur {
                    out.insert(id, cand);
                }
            }
        }
    }
    out
}

/// The coarse function-level fallback: every block inherits its function's
/// reverse call-graph depth to the target function, scaled by 10.
pub fn function_level_distances(
    program: &Program,
    cg: &CallGraph,
    target: &TargetSpec,
) -> BlockDistances {
    let depth = cg.depth_to(target.func());
    let mut out = BlockDistances::new();
    for (fi, func) in program.functions.iter().enumerate() {
        let f = FuncId(fi as u32);
        if let Some(&d) = depth.get(&f) {
            for b in 0..func.blocks.len() as u32 {
                out.insert(BlockId { func: f, block: b }, d * 10);
            }
        }
    }
    out
}

/// Harmonic combination over targets:
/// `Distance(bb, T) = [sum_t Distance(bb, t)^-1]^-1`.
/// A zero distance to any target wins outright; targets with no defined
/// distance for a block contribute nothing; blocks defined for no target are
/// absent.
pub fn combine_targets(per_target: &[BlockDistances]) -> CombinedDistances {
    let mut out = CombinedDistances::new();
    let mut keys: Vec<BlockId> = per_target.iter().flat_map(|m| m.keys().copied()).collect();
    keys.sort();
    keys.dedup();
    for b in keys {
        let mut inv_sum = 0.0f64;
        let mut any_zero = false;
        for m in per_target {
            match m.get(&b) {
                Some(0) => any_zero = true,
                Some(&d) => inv_sum += 1.0 / d as f64,
                None => {}
            }
        }
        let combined = if any_zero {
            0.0
        } else if inv_sum > 0.0 {
            1.0 / inv_sum
        } else {
            continue;
        };
        out.insert(b, combined);
    }
    out
}
