//! Value-flow distances and influence scores.
//!
//! VFD measures, per target datum, the shortest forward hop count through the
//! value-flow graph from an instruction to a node defining that datum. VFI
//! folds the per-datum distances into one instruction-level influence (closer
//! means more influential), and VFB takes the per-block minimum. The seed
//! level score (VFS) is accumulated at execution time from VFB.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::analysis::{datum_nodes, def_sites, CallGraph, PointsToMap, ValueFlowGraph};
use crate::ir::{BlockId, Datum, InstrId, Program, TargetSpec};

pub type VfiMap = BTreeMap<InstrId, f64>;
pub type VfbMap = BTreeMap<BlockId, f64>;

/// Per-datum VFD maps plus the global maximum over all defined distances.
#[derive(Debug, Clone, Default)]
pub struct VfdMaps {
    pub per_datum: Vec<(Datum, BTreeMap<InstrId, u32>)>,
    pub max_vfd: u32,
}

/// Shortest forward-path hop count from each VFG node to any node in `base`
/// (reverse BFS from the base set). Nodes with no path are absent.
pub fn vfd(vfg: &ValueFlowGraph, base: &BTreeSet<InstrId>) -> BTreeMap<InstrId, u32> {
    let mut dist: BTreeMap<usize, u32> = BTreeMap::new();
    let mut work = VecDeque::new();
    for id in base {
        if let Some(n) = vfg.node(*id) {
            if let std::collections::btree_map::Entry::Vacant(slot) = dist.entry(n) {
                slot.insert(0);
                work.push_back(n);
            }
        }
    }
    while let Some(n) = work.pop_front() {
        let d = dist[&n];
        for &p in &vfg.preds[n] {
            if let std::collections::btree_map::Entry::Vacant(slot) = dist.entry(p) {
                slot.insert(d + 1);
                work.push_back(p);
            }
        }
    }
    dist.into_iter().map(|(n, d)| (vfg.nodes[n], d)).collect()
}

/// Computes VFD maps for every datum in the union of the targets' data sets.
/// Shared data are counted once.
pub fn vfd_maps(
    program: &Program,
    pts: &PointsToMap,
    cg: &CallGraph,
    vfg: &ValueFlowGraph,
    targets: &[TargetSpec],
) -> VfdMaps {
    let defs = def_sites(program, cg);
    let mut data: Vec<Datum> = Vec::new();
    for t in targets {
        for &d in &t.data {
            if !data.contains(&d) {
                data.push(d);
            }
        }
    }
    let mut per_datum = Vec::new();
    let mut max_vfd = 0u32;
    for datum in data {
        let base = datum_nodes(program, pts, &defs, datum);
        let map = vfd(vfg, &base);
        if let Some(&m) = map.values().max() {
            max_vfd = max_vfd.max(m);
        }
        per_datum.push((datum, map));
    }
    VfdMaps { per_datum, max_vfd }
}

/// Instruction-level influence:
/// `VFI(i, T) = sum_v [max_vfd - VFD(i, v)] / |V(T)|`,
/// where a datum with no defined VFD for `i` contributes 0. Instructions with
/// no defined VFD at all are absent.
pub fn vfi(maps: &VfdMaps) -> VfiMap {
    let n = maps.per_datum.len();
    if n == 0 {
        return VfiMap::new();
    }
    let mut out = VfiMap::new();
    for (_, map) in &maps.per_datum {
        for (&i, &d) in map {
            *out.entry(i).or_insert(0.0) += (maps.max_vfd - d) as f64;
        }
    }
    for v in out.values_mut() {
        *v /= n as f64;
    }
    out
}

/// Influence of a single datum under a shared `max_vfd`, used by the
/// mean-decomposition property check.
pub fn vfi_for_datum(maps: &VfdMaps, datum_index: usize) -> VfiMap {
    let (_, map) = &maps.per_datum[datum_index];
    map.iter()
        .map(|(&i, &d)| (i, (maps.max_vfd - d) as f64))
        .collect()
}

/// Block-level influence: the minimum VFI over the block's scored
/// instructions. Blocks with no scored instructions are absent.
pub fn vfb(vfi: &VfiMap) -> VfbMap {
    let mut out = VfbMap::new();
    for (&i, &score) in vfi {
        out.entry(i.block)
            .and_modify(|cur| *cur = cur.min(score))
            .or_insert(score);
    }
    out
}
