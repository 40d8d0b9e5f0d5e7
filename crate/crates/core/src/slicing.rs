//! Hybrid slicing: the union of a control-flow slice and a value-flow slice,
//! plus the boundary-block set that the distance channel instruments.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::analysis::{def_sites, datum_nodes, CallGraph, PointsToMap, ValueFlowGraph};
use crate::ir::{BlockId, FuncId, Program, TargetSpec};

/// Where a block's slice membership came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Control,
    Value,
    Both,
}

impl Provenance {
    fn merge(self, other: Provenance) -> Provenance {
        if self == other {
            self
        } else {
            Provenance::Both
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SliceSet {
    pub blocks: BTreeMap<BlockId, Provenance>,
    pub functions: BTreeSet<FuncId>,
}

impl SliceSet {
    pub fn contains(&self, b: BlockId) -> bool {
        self.blocks.contains_key(&b)
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn insert(&mut self, b: BlockId, p: Provenance) {
        self.blocks
            .entry(b)
            .and_modify(|old| *old = old.merge(p))
            .or_insert(p);
        self.functions.insert(b.func);
    }
}

#[derive(Debug, Clone, Default)]
pub struct BoundarySet {
    pub blocks: BTreeSet<BlockId>,
}

/// Control-flow slice. Functions that reach the target function via reverse
/// call-graph BFS are sliced; within each sliced function, a block is sliced
/// iff it can reach a criterion block along intra-procedural CFG edges. The
/// criterion blocks are the call sites of sliced functions, plus the target
/// block itself inside the target function.
pub fn control_flow_slice(
    program: &Program,
    cg: &CallGraph,
    target: &TargetSpec,
) -> SliceSet {
    let sliced_functions = cg.reaching_functions(target.func());
    let mut out = SliceSet::default();

    for &f in &sliced_functions {
        let func = program.func(f);
        let mut criteria: BTreeSet<u32> = BTreeSet::new();
        for e in &cg.edges {
            if e.caller == f && sliced_functions.contains(&e.callee) {
                criteria.insert(e.site.block.block);
            }
        }
        if f == target.func() {
            criteria.insert(target.block().block);
        }
        // Blocks that reach a criterion block: reverse BFS over the CFG.
        let preds = func.predecessors();
        let mut reaches: BTreeSet<u32> = criteria.clone();
        let mut work: VecDeque<u32> = criteria.iter().copied().collect();
        while let Some(b) = work.pop_front() {
            for &p in &preds[b as usize] {
                if reaches.insert(p) {
                    work.push_back(p);
                }
            }
        }
        for b in reaches {
            out.insert(BlockId { func: f, block: b }, Provenance::Control);
        }
    }
    out
}

/// Value-flow slice: blocks containing an instruction backward-reachable in
/// the VFG from the target-data defining nodes. Empty target data yields an
/// empty slice.
pub fn value_flow_slice(
    program: &Program,
    pts: &PointsToMap,
    cg: &CallGraph,
    vfg: &ValueFlowGraph,
    target: &TargetSpec,
) -> SliceSet {
    let mut out = SliceSet::default();
    if target.data.is_empty() {
        return out;
    }
    let defs = def_sites(program, cg);
    let mut work: VecDeque<usize> = VecDeque::new();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for &datum in &target.data {
        for id in datum_nodes(program, pts, &defs, datum) {
            if let Some(n) = vfg.node(id) {
                if seen.insert(n) {
                    work.push_back(n);
                }
            }
        }
    }
    while let Some(n) = work.pop_front() {
        for &p in &vfg.preds[n] {
            if seen.insert(p) {
                work.push_back(p);
            }
        }
    }
    for n in seen {
        out.insert(vfg.nodes[n].block, Provenance::Value);
    }
    out
}

/// Union of the control-flow and value-flow slices, with merged provenance.
pub fn hybrid_slice(sc: &SliceSet, sv: &SliceSet) -> SliceSet {
    let mut out = sc.clone();
    for (&b, &p) in &sv.blocks {
        out.insert(b, p);
    }
    out
}

/// The boundary predicate: a sliced block with no successors, or with at
/// least one successor outside the slice.
pub fn boundary_blocks(program: &Program, slice: &SliceSet) -> BoundarySet {
    let mut out = BoundarySet::default();
    for &b in slice.blocks.keys() {
        let succs = program.func(b.func).successors(b.block);
        let is_boundary = succs.is_empty()
            || succs
                .iter()
                .any(|&s| !slice.contains(BlockId { func: b.func, block: s }));
        if is_boundary {
            out.blocks.insert(b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_call_graph, build_vfg, points_to};
    use crate::ir::{parse_program, resolve_target};

    fn slices(src: &str, target: &str) -> (Program, SliceSet, SliceSet, SliceSet, BoundarySet) {
        let p = parse_program(src).unwrap();
        let t = resolve_target(&p, target).unwrap();
        let pts = points_to(&p);
        let cg = build_call_graph(&p, &pts);
        let vfg = build_vfg(&p, &pts, &cg);
        let sc = control_flow_slice(&p, &cg, &t);
        let sv = value_flow_slice(&p, &pts, &cg, &vfg, &t);
        let hy = hybrid_slice(&sc, &sv);
        let om = boundary_blocks(&p, &hy);
        (p, sc, sv, hy, om)
    }

    fn block_names(p: &Program, blocks: impl IntoIterator<Item = BlockId>) -> BTreeSet<String> {
        blocks.into_iter().map(|b| p.block_name(b)).collect()
    }

    #[test]
    fn straight_line_slices_all_blocks() {
        let src = "func f(entry=b1) {
            block b1 { x = input 0 ; br b2 }
            block b2 { nop ; br b3 }
            block b3 { y = binop add x x ; ret }
        }";
        let (p, sc, _, hy, om) = slices(src, "f:b3:0");
        assert_eq!(sc.blocks.len(), 3);
        assert_eq!(hy.blocks.len(), 3);
        // only the block without successors is boundary
        assert_eq!(block_names(&p, om.blocks), BTreeSet::from(["f:b3".to_string()]));
    }

    #[test]
    fn branch_that_exits_without_reaching_target_is_excluded() {
        let src = "func f(entry=b1) {
            block b1 { c = input 0 ; brcond c b2 b4 }
            block b2 { nop ; br b3 }
            block b3 { t = const 1 ; ret }
            block b4 { nop ; ret }
        }";
        let (p, sc, _, _, _) = slices(src, "f:b3:0");
        let names = block_names(&p, sc.blocks.keys().copied());
        assert!(names.contains("f:b1"));
        assert!(names.contains("f:b2"));
        assert!(names.contains("f:b3"));
        assert!(!names.contains("f:b4"));
    }

    #[test]
    fn rejoining_branch_is_included() {
        let src = "func f(entry=b1) {
            block b1 { c = input 0 ; brcond c b2 b3 }
            block b2 { nop ; br b4 }
            block b3 { nop ; br b4 }
            block b4 { t = const 1 ; ret }
        }";
        let (_, sc, _, _, _) = slices(src, "f:b4:0");
        assert_eq!(sc.blocks.len(), 4);
    }

    #[test]
    fn value_slice_follows_defs_not_dead_stores() {
        let src = "global g
            global unrelated
            func f(entry=b1) {
              block b1 { v = input 0 ; store g, v ; br b2 }
              block b2 { d = const 9 ; store unrelated, d ; br b3 }
              block b3 { i = load g ; y = binop add i i ; ret }
            }";
        let (p, _, sv, _, _) = slices(src, "f:b3:1");
        let names = block_names(&p, sv.blocks.keys().copied());
        assert!(names.contains("f:b1"), "defining block sliced: {names:?}");
        assert!(names.contains("f:b3"), "target block sliced");
        assert!(!names.contains("f:b2"), "dead store must not be value-sliced: {names:?}");
    }

    #[test]
    fn empty_target_data_gives_empty_value_slice() {
        let src = "func f(entry=b1) { block b1 { trap } }";
        let (_, _, sv, hy, _) = slices(src, "f:b1");
        assert!(sv.is_empty());
        assert_eq!(hy.blocks.len(), 1); // control slice only
    }

    #[test]
    fn hybrid_is_superset_of_both() {
        let src = "global g
            func f(entry=b1) {
              block b1 { v = input 0 ; c = input 1 ; brcond c b2 b3 }
              block b2 { store g, v ; br b4 }
              block b3 { nop ; br b4 }
              block b4 { i = load g ; x = binop add i i ; brcond x b5 b6 }
              block b5 { nop ; ret }
              block b6 { t = const 0 ; ret }
            }";
        let (_, sc, sv, hy, _) = slices(src, "f:b6:0");
        for b in sc.blocks.keys() {
            assert!(hy.contains(*b));
        }
        for b in sv.blocks.keys() {
            assert!(hy.contains(*b));
        }
        // disjoint-union sanity: merged provenance where both apply
        for (b, p) in &hy.blocks {
            let in_sc = sc.contains(*b);
            let in_sv = sv.contains(*b);
            match (in_sc, in_sv) {
                (true, true) => assert_eq!(*p, Provenance::Both),
                (true, false) => assert_eq!(*p, Provenance::Control),
                (false, true) => assert_eq!(*p, Provenance::Value),
                (false, false) => panic!("block in hybrid but in neither slice"),
            }
        }
    }

    #[test]
    fn value_block_off_the_control_path_joins_hybrid() {
        // The store block b2 exits without reaching the target, so control
        // slicing drops it; it still influences the target value.
        let src = "global g
            func f(entry=b1) {
              block b1 { v = input 0 ; c = input 1 ; brcond c b2 b3 }
              block b2 { store g, v ; ret }
              block b3 { i = load g ; y = binop add i i ; ret }
            }";
        let (p, sc, sv, hy, _) = slices(src, "f:b3:1");
        let b2 = BlockId { func: p.func_by_name("f").unwrap(), block: 1 };
        assert!(!sc.contains(b2));
        assert!(sv.contains(b2));
        assert!(hy.contains(b2));
        assert_eq!(hy.blocks[&b2], Provenance::Value);
    }

    #[test]
    fn fully_sliced_diamond_has_only_join_boundary() {
        let src = "func f(entry=b1) {
            block b1 { c = input 0 ; brcond c b2 b3 }
            block b2 { nop ; br b4 }
            block b3 { nop ; br b4 }
            block b4 { t = const 1 ; ret }
        }";
        let (p, _, _, hy, om) = slices(src, "f:b4:0");
        assert_eq!(hy.blocks.len(), 4);
        assert_eq!(block_names(&p, om.blocks), BTreeSet::from(["f:b4".to_string()]));
    }

    #[test]
    fn sliced_block_with_unsliced_successor_is_boundary() {
        let src = "func f(entry=b1) {
            block b1 { c = input 0 ; brcond c b2 b3 }
            block b2 { t = const 1 ; ret }
            block b3 { nop ; ret }
        }";
        let (p, _, _, hy, om) = slices(src, "f:b2:0");
        // b1 branches into the slice (b2) and out of it (b3)
        assert!(hy.contains(BlockId { func: p.entry, block: 0 }));
        let names = block_names(&p, om.blocks);
        assert!(names.contains("f:b1"));
        assert!(names.contains("f:b2"));
    }

    #[test]
    fn unreachable_function_changes_nothing() {
        let base = "func f(entry=b1) {
            block b1 { x = input 0 ; br b2 }
            block b2 { y = binop add x x ; ret }
        }";
        let extended = "func f(entry=b1) {
            block b1 { x = input 0 ; br b2 }
            block b2 { y = binop add x x ; ret }
        }
        func ghost(entry=g1) { block g1 { q = const 1 ; ret } }";
        let (p1, _, _, hy1, om1) = slices(base, "f:b2:0");
        let (p2, _, _, hy2, om2) = slices(extended, "f:b2:0");
        assert_eq!(
            block_names(&p1, hy1.blocks.keys().copied()),
            block_names(&p2, hy2.blocks.keys().copied())
        );
        assert_eq!(block_names(&p1, om1.blocks), block_names(&p2, om2.blocks));
    }
}
