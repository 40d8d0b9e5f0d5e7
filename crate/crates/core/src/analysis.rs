//! Whole-program static analysis: inclusion-based points-to facts, the call
//! graph (with indirect calls resolved through points-to sets), and the
//! value-flow graph.
//!
//! The pointer analysis is flow- and context-insensitive and collapses each
//! array to a single abstract object. Points-to resolution and call-graph
//! construction reinforce each other (indirect call targets feed parameter
//! bindings), so both run inside one fixed-point loop.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ir::{
    BlockId, Datum, FuncId, GlobalId, Instr, InstrId, MemRef, Program, VarId,
};

/// An abstract memory object: a global cell/array or a function address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsObj {
    Global(GlobalId),
    Func(FuncId),
}

/// A function-scoped variable key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub func: FuncId,
    pub var: VarId,
}

/// Least fixed point of the inclusion constraints.
#[derive(Debug, Clone, Default)]
pub struct PointsToMap {
    pub vars: BTreeMap<VarKey, BTreeSet<AbsObj>>,
    /// What each global cell may hold (cells can store pointers).
    pub cells: BTreeMap<GlobalId, BTreeSet<AbsObj>>,
}

impl PointsToMap {
    pub fn var(&self, func: FuncId, var: VarId) -> &BTreeSet<AbsObj> {
        static EMPTY: std::sync::OnceLock<BTreeSet<AbsObj>> = std::sync::OnceLock::new();
        self.vars
            .get(&VarKey { func, var })
            .unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }

    /// Abstract cells a memory operand may address. A direct global name is
    /// the cell itself; a variable contributes every global in its set.
    pub fn mem_objects(&self, func: FuncId, mem: &MemRef) -> Vec<GlobalId> {
        match mem {
            MemRef::Global(g) => vec![*g],
            MemRef::Var(v) => self
                .var(func, *v)
                .iter()
                .filter_map(|o| match o {
                    AbsObj::Global(g) => Some(*g),
                    AbsObj::Func(_) => None,
                })
                .collect(),
        }
    }

    /// Functions a call-indirect operand may address.
    pub fn func_objects(&self, func: FuncId, var: VarId) -> Vec<FuncId> {
        self.var(func, var)
            .iter()
            .filter_map(|o| match o {
                AbsObj::Func(f) => Some(*f),
                AbsObj::Global(_) => None,
            })
            .collect()
    }

    fn add_var(&mut self, key: VarKey, objs: &BTreeSet<AbsObj>) -> bool {
        if objs.is_empty() {
            return false;
        }
        let set = self.vars.entry(key).or_default();
        let before = set.len();
        set.extend(objs.iter().copied());
        set.len() != before
    }

    fn add_obj(&mut self, key: VarKey, obj: AbsObj) -> bool {
        self.vars.entry(key).or_default().insert(obj)
    }

    fn add_cell(&mut self, cell: GlobalId, objs: &BTreeSet<AbsObj>) -> bool {
        if objs.is_empty() {
            return false;
        }
        let set = self.cells.entry(cell).or_default();
        let before = set.len();
        set.extend(objs.iter().copied());
        set.len() != before
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallEdge {
    pub caller: FuncId,
    pub site: InstrId,
    pub callee: FuncId,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    pub edges: Vec<CallEdge>,
    /// callee -> indices into `edges`, the exact transpose of the edge list.
    pub callers: BTreeMap<FuncId, Vec<usize>>,
    /// Indirect call sites whose points-to set resolved to no function.
    pub unresolved_sites: Vec<InstrId>,
}

impl CallGraph {
    pub fn edges_into(&self, callee: FuncId) -> impl Iterator<Item = &CallEdge> {
        self.callers
            .get(&callee)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    /// Functions that can reach `target` through calls, including `target`
    /// itself (reverse BFS; recursion-safe).
    pub fn reaching_functions(&self, target: FuncId) -> BTreeSet<FuncId> {
        let mut seen = BTreeSet::from([target]);
        let mut work = VecDeque::from([target]);
        while let Some(f) = work.pop_front() {
            for e in self.edges_into(f) {
                if seen.insert(e.caller) {
                    work.push_back(e.caller);
                }
            }
        }
        seen
    }

    /// Reverse-BFS hop count from each function to `target` along call edges.
    pub fn depth_to(&self, target: FuncId) -> BTreeMap<FuncId, u32> {
        let mut depth = BTreeMap::from([(target, 0u32)]);
        let mut work = VecDeque::from([target]);
        while let Some(f) = work.pop_front() {
            let d = depth[&f];
            for e in self.edges_into(f) {
                if let std::collections::btree_map::Entry::Vacant(slot) = depth.entry(e.caller) {
                    slot.insert(d + 1);
                    work.push_back(e.caller);
                }
            }
        }
        depth
    }
}

/// A node in the value-flow graph: an instruction that defines or stores a
/// value. Edges run along def -> use.
#[derive(Debug, Clone, Default)]
pub struct ValueFlowGraph {
    pub nodes: Vec<InstrId>,
    node_index: BTreeMap<InstrId, usize>,
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
}

impl ValueFlowGraph {
    pub fn from_edges(nodes: Vec<InstrId>, edges: &[(InstrId, InstrId)]) -> Self {
        let node_index: BTreeMap<InstrId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut succs = vec![Vec::new(); nodes.len()];
        let mut preds = vec![Vec::new(); nodes.len()];
        let mut seen = BTreeSet::new();
        for (from, to) in edges {
            let (fi, ti) = (node_index[from], node_index[to]);
            if seen.insert((fi, ti)) {
                succs[fi].push(ti);
                preds[ti].push(fi);
            }
        }
        ValueFlowGraph { nodes, node_index, succs, preds }
    }

    pub fn node(&self, id: InstrId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(|s| s.len()).sum()
    }

    /// Edge list in a stable order, for serialization and tests.
    pub fn edges(&self) -> Vec<(InstrId, InstrId)> {
        let mut out = Vec::new();
        for (i, ss) in self.succs.iter().enumerate() {
            for &s in ss {
                out.push((self.nodes[i], self.nodes[s]));
            }
        }
        out.sort();
        out
    }
}

/// Computes the least fixed point of the inclusion constraints, resolving
/// indirect calls as their operand sets grow.
pub fn points_to(program: &Program) -> PointsToMap {
    let mut pts = PointsToMap::default();
    loop {
        let mut changed = false;
        for (fi, func) in program.functions.iter().enumerate() {
            let f = FuncId(fi as u32);
            for bb in &func.blocks {
                for instr in &bb.instrs {
                    changed |= apply_constraint(program, &mut pts, f, instr);
                }
            }
        }
        if !changed {
            return pts;
        }
    }
}

fn apply_constraint(program: &Program, pts: &mut PointsToMap, f: FuncId, instr: &Instr) -> bool {
    match instr {
        Instr::Addr { dst, global } => {
            pts.add_obj(VarKey { func: f, var: *dst }, AbsObj::Global(*global))
        }
        Instr::FuncAddr { dst, func } => {
            pts.add_obj(VarKey { func: f, var: *dst }, AbsObj::Func(*func))
        }
        Instr::Load { dst, src } | Instr::ALoad { dst, array: src, .. } => {
            let mut changed = false;
            for g in pts.mem_objects(f, src) {
                if let Some(objs) = pts.cells.get(&g).cloned() {
                    changed |= pts.add_var(VarKey { func: f, var: *dst }, &objs);
                }
            }
            changed
        }
        Instr::Store { dst, value } | Instr::AStore { array: dst, value, .. } => {
            let objs = pts.var(f, *value).clone();
            let mut changed = false;
            for g in pts.mem_objects(f, dst) {
                changed |= pts.add_cell(g, &objs);
            }
            changed
        }
        Instr::Call { dst, callee, args } => bind_call(program, pts, f, *dst, *callee, args),
        Instr::CallIndirect { dst, callee, args } => {
            let mut changed = false;
            for target in pts.func_objects(f, *callee) {
                changed |= bind_call(program, pts, f, *dst, target, args);
            }
            changed
        }
        _ => false,
    }
}

fn bind_call(
    program: &Program,
    pts: &mut PointsToMap,
    caller: FuncId,
    dst: Option<VarId>,
    callee: FuncId,
    args: &[VarId],
) -> bool {
    let mut changed = false;
    let cf = program.func(callee);
    for (i, arg) in args.iter().enumerate().take(cf.param_count as usize) {
        let objs = pts.var(caller, *arg).clone();
        changed |= pts.add_var(VarKey { func: callee, var: VarId(i as u32) }, &objs);
    }
    if let Some(d) = dst {
        for bb in &cf.blocks {
            if let crate::ir::Terminator::Ret { value: Some(v) } = bb.term {
                let objs = pts.var(callee, v).clone();
                changed |= pts.add_var(VarKey { func: caller, var: d }, &objs);
            }
        }
    }
    changed
}

/// Builds the call graph: one edge per direct call, one edge per function in
/// an indirect call operand's points-to set. Indirect sites that resolve to
/// nothing are reported, not guessed.
pub fn build_call_graph(program: &Program, pts: &PointsToMap) -> CallGraph {
    let mut cg = CallGraph::default();
    for (fi, func) in program.functions.iter().enumerate() {
        let f = FuncId(fi as u32);
        for (bi, bb) in func.blocks.iter().enumerate() {
            for (ii, instr) in bb.instrs.iter().enumerate() {
                let site = InstrId {
                    block: BlockId { func: f, block: bi as u32 },
                    index: ii as u32,
                };
                match instr {
                    Instr::Call { callee, .. } => {
                        cg.edges.push(CallEdge { caller: f, site, callee: *callee });
                    }
                    Instr::CallIndirect { callee, .. } => {
                        let targets = pts.func_objects(f, *callee);
                        if targets.is_empty() {
                            cg.unresolved_sites.push(site);
                        }
                        for t in targets {
                            cg.edges.push(CallEdge { caller: f, site, callee: t });
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    for (i, e) in cg.edges.iter().enumerate() {
        cg.callers.entry(e.callee).or_default().push(i);
    }
    cg
}

/// The defining VFG nodes whose values can reach uses of a variable.
/// Local definitions count directly; a parameter additionally inherits the
/// defs of the matching argument at every call site, chased transitively.
pub struct DefSites {
    sites: BTreeMap<VarKey, BTreeSet<InstrId>>,
}

impl DefSites {
    pub fn get(&self, func: FuncId, var: VarId) -> &BTreeSet<InstrId> {
        static EMPTY: std::sync::OnceLock<BTreeSet<InstrId>> = std::sync::OnceLock::new();
        self.sites
            .get(&VarKey { func, var })
            .unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }
}

/// Computes [`DefSites`] for every variable, iterating parameter/argument
/// bindings to a fixed point (recursion makes one pass insufficient).
pub fn def_sites(program: &Program, cg: &CallGraph) -> DefSites {
    let mut sites: BTreeMap<VarKey, BTreeSet<InstrId>> = BTreeMap::new();
    for (fi, func) in program.functions.iter().enumerate() {
        let f = FuncId(fi as u32);
        for (bi, bb) in func.blocks.iter().enumerate() {
            for (ii, instr) in bb.instrs.iter().enumerate() {
                if let Some(d) = instr.def() {
                    let id = InstrId {
                        block: BlockId { func: f, block: bi as u32 },
                        index: ii as u32,
                    };
                    sites.entry(VarKey { func: f, var: d }).or_default().insert(id);
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for e in &cg.edges {
            let callee_fn = program.func(e.callee);
            let args = match program.instr(e.site) {
                Some(Instr::Call { args, .. }) | Some(Instr::CallIndirect { args, .. }) => args,
                _ => continue,
            };
            for (i, arg) in args.iter().enumerate().take(callee_fn.param_count as usize) {
                let from = sites
                    .get(&VarKey { func: e.caller, var: *arg })
                    .cloned()
                    .unwrap_or_default();
                if from.is_empty() {
                    continue;
                }
                let into = sites
                    .entry(VarKey { func: e.callee, var: VarId(i as u32) })
                    .or_default();
                let before = into.len();
                into.extend(from.iter().copied());
                changed |= into.len() != before;
            }
        }
        if !changed {
            return DefSites { sites };
        }
    }
}

/// Builds the value-flow graph:
/// (a) def -> use edges for scalar variables (flow-insensitive within a
///     function, routed through [`DefSites`] for parameters),
/// (b) store -> load edges for every shared abstract object,
/// (c) return-def -> call-result edges for each call edge; argument ->
///     parameter-use edges fall out of (a) because [`DefSites`] chases
///     parameters into callers.
pub fn build_vfg(program: &Program, pts: &PointsToMap, cg: &CallGraph) -> ValueFlowGraph {
    let defs = def_sites(program, cg);

    let mut nodes = Vec::new();
    let mut stores: Vec<(InstrId, Vec<GlobalId>)> = Vec::new();
    let mut loads: Vec<(InstrId, Vec<GlobalId>)> = Vec::new();
    for (fi, func) in program.functions.iter().enumerate() {
        let f = FuncId(fi as u32);
        for (bi, bb) in func.blocks.iter().enumerate() {
            for (ii, instr) in bb.instrs.iter().enumerate() {
                let id = InstrId {
                    block: BlockId { func: f, block: bi as u32 },
                    index: ii as u32,
                };
                let is_store = matches!(instr, Instr::Store { .. } | Instr::AStore { .. });
                if instr.def().is_some() || is_store {
                    nodes.push(id);
                }
                match instr {
                    Instr::Store { dst, .. } | Instr::AStore { array: dst, .. } => {
                        stores.push((id, pts.mem_objects(f, dst)));
                    }
                    Instr::Load { src, .. } | Instr::ALoad { array: src, .. } => {
                        loads.push((id, pts.mem_objects(f, src)));
                    }
                    _ => {}
                }
            }
        }
    }

    let mut edges: Vec<(InstrId, InstrId)> = Vec::new();

    // (a) def -> use, for every operand read by a node instruction.
    for (fi, func) in program.functions.iter().enumerate() {
        let f = FuncId(fi as u32);
        for (bi, bb) in func.blocks.iter().enumerate() {
            for (ii, instr) in bb.instrs.iter().enumerate() {
                let user = InstrId {
                    block: BlockId { func: f, block: bi as u32 },
                    index: ii as u32,
                };
                if instr.def().is_none()
                    && !matches!(instr, Instr::Store { .. } | Instr::AStore { .. })
                {
                    continue;
                }
                for used in instr.uses() {
                    for d in defs.get(f, used) {
                        if *d != user {
                            edges.push((*d, user));
                        }
                    }
                }
            }
        }
    }

    // (b) store -> load through shared abstract objects.
    for (s, sobjs) in &stores {
        for (l, lobjs) in &loads {
            if sobjs.iter().any(|o| lobjs.contains(o)) {
                edges.push((*s, *l));
            }
        }
    }

    // (c) return-def -> call-result.
    for e in &cg.edges {
        let dst = match program.instr(e.site) {
            Some(Instr::Call { dst, .. }) | Some(Instr::CallIndirect { dst, .. }) => *dst,
            _ => None,
        };
        if dst.is_none() {
            continue;
        }
        for bb in &program.func(e.callee).blocks {
            if let crate::ir::Terminator::Ret { value: Some(v) } = bb.term {
                for d in defs.get(e.callee, v) {
                    if *d != e.site {
                        edges.push((*d, e.site));
                    }
                }
            }
        }
    }

    ValueFlowGraph::from_edges(nodes, &edges)
}

/// Resolves the defining nodes of a target datum: for a variable, its def
/// sites; for a global, every store that may write it. An empty set means the
/// datum has no value-flow channel.
pub fn datum_nodes(
    program: &Program,
    pts: &PointsToMap,
    defs: &DefSites,
    datum: Datum,
) -> BTreeSet<InstrId> {
    match datum {
        Datum::Var(f, v) => defs.get(f, v).clone(),
        Datum::Global(g) => {
            let mut out = BTreeSet::new();
            for (fi, func) in program.functions.iter().enumerate() {
                let f = FuncId(fi as u32);
                for (bi, bb) in func.blocks.iter().enumerate() {
                    for (ii, instr) in bb.instrs.iter().enumerate() {
                        let writes = match instr {
                            Instr::Store { dst, .. } | Instr::AStore { array: dst, .. } => {
                                pts.mem_objects(f, dst).contains(&g)
                            }
                            _ => false,
                        };
                        if writes {
                            out.insert(InstrId {
                                block: BlockId { func: f, block: bi as u32 },
                                index: ii as u32,
                            });
                        }
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn ids(program: &Program, names: &[&str]) -> Vec<InstrId> {
        names
            .iter()
            .map(|n| {
                let parts: Vec<&str> = n.split(':').collect();
                let f = program.func_by_name(parts[0]).unwrap();
                let b = program.func(f).block_by_label(parts[1]).unwrap();
                InstrId {
                    block: BlockId { func: f, block: b },
                    index: parts[2].parse().unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn funcaddr_single_constraint() {
        let p = parse_program(
            "func main(entry=b) { block b { p = funcaddr helper ; ret } }\n\
             func helper(entry=c) { block c { ret } }",
        )
        .unwrap();
        let pts = points_to(&p);
        let f = p.func_by_name("main").unwrap();
        let helper = p.func_by_name("helper").unwrap();
        assert_eq!(
            pts.var(f, VarId(0)).iter().copied().collect::<Vec<_>>(),
            vec![AbsObj::Func(helper)]
        );
    }

    #[test]
    fn pointer_through_global_cell() {
        // p = funcaddr F; store g_ptr, p; q = load g_ptr  =>  pts(q) >= {F}
        let p = parse_program(
            "global g_ptr\n\
             func main(entry=b) {\n\
               block b { p = funcaddr F ; store g_ptr, p ; q = load g_ptr ; ret }\n\
             }\n\
             func F(entry=c) { block c { ret } }",
        )
        .unwrap();
        let pts = points_to(&p);
        let main = p.func_by_name("main").unwrap();
        let f = p.func_by_name("F").unwrap();
        let q = p.func(main).var_names.iter().position(|n| n == "q").unwrap();
        assert!(pts.var(main, VarId(q as u32)).contains(&AbsObj::Func(f)));
    }

    #[test]
    fn no_pointers_means_empty_map() {
        let p = parse_program(
            "func main(entry=b) { block b { x = const 1 ; y = binop add x x ; ret } }",
        )
        .unwrap();
        let pts = points_to(&p);
        assert!(pts.vars.is_empty());
        assert!(pts.cells.is_empty());
    }

    #[test]
    fn points_to_is_monotone_under_added_addr() {
        let base = "global g\nglobal h\nfunc main(entry=b) { block b { p = addr g ; store h, p ; q = load h ; ret } }";
        let extended = "global g\nglobal h\nfunc main(entry=b) { block b { p = addr g ; store h, p ; q = load h ; r = addr h ; ret } }";
        let pts1 = points_to(&parse_program(base).unwrap());
        let pts2 = points_to(&parse_program(extended).unwrap());
        for (k, set) in &pts1.vars {
            assert!(pts2.vars.get(k).is_some_and(|s| set.is_subset(s)));
        }
        for (k, set) in &pts1.cells {
            assert!(pts2.cells.get(k).is_some_and(|s| set.is_subset(s)));
        }
    }

    #[test]
    fn direct_and_indirect_call_edges() {
        let p = parse_program(
            "global slot\n\
             func main(entry=b) {\n\
               block b { p = funcaddr F ; q = funcaddr G ; c = input 0 ; brcond c b2 b3 }\n\
               block b2 { store slot, p ; br b4 }\n\
               block b3 { store slot, q ; br b4 }\n\
               block b4 { h = load slot ; call_indirect h ; ret }\n\
             }\n\
             func F(entry=c) { block c { ret } }\n\
             func G(entry=d) { block d { ret } }",
        )
        .unwrap();
        let pts = points_to(&p);
        let cg = build_call_graph(&p, &pts);
        let main = p.func_by_name("main").unwrap();
        let f = p.func_by_name("F").unwrap();
        let g = p.func_by_name("G").unwrap();
        let mut callees: Vec<FuncId> =
            cg.edges.iter().filter(|e| e.caller == main).map(|e| e.callee).collect();
        callees.sort();
        assert_eq!(callees, vec![f, g]);
        assert!(cg.unresolved_sites.is_empty());
    }

    #[test]
    fn unresolved_indirect_call_reports_diagnostic() {
        let p = parse_program(
            "func main(entry=b) { block b { p = const 0 ; call_indirect p ; ret } }",
        )
        .unwrap();
        let pts = points_to(&p);
        let cg = build_call_graph(&p, &pts);
        assert!(cg.edges.is_empty());
        assert_eq!(cg.unresolved_sites.len(), 1);
    }

    #[test]
    fn recursion_self_edge_terminates_traversals() {
        let p = parse_program("func main(entry=b) { block b { call main ; ret } }").unwrap();
        let cg = build_call_graph(&p, &points_to(&p));
        assert_eq!(cg.edges.len(), 1);
        let main = p.func_by_name("main").unwrap();
        assert_eq!(cg.reaching_functions(main).len(), 1);
        assert_eq!(cg.depth_to(main)[&main], 0);
    }

    #[test]
    fn reverse_index_is_exact_transpose() {
        let p = parse_program(
            "func a(entry=b) { block b { call c ; call c ; ret } }\n\
             func c(entry=d) { block d { ret } }",
        )
        .unwrap();
        let cg = build_call_graph(&p, &points_to(&p));
        let mut from_index: Vec<CallEdge> = Vec::new();
        for (callee, idxs) in &cg.callers {
            for &i in idxs {
                assert_eq!(cg.edges[i].callee, *callee);
                from_index.push(cg.edges[i]);
            }
        }
        from_index.sort();
        let mut all = cg.edges.clone();
        all.sort();
        assert_eq!(from_index, all);
    }

    #[test]
    fn direct_def_use_edge() {
        let p = parse_program(
            "func main(entry=b) { block b { x = const 1 ; y = binop add x x ; ret } }",
        )
        .unwrap();
        let pts = points_to(&p);
        let cg = build_call_graph(&p, &pts);
        let vfg = build_vfg(&p, &pts, &cg);
        let want = ids(&p, &["main:b:0", "main:b:1"]);
        assert_eq!(vfg.edges(), vec![(want[0], want[1])]);
    }

    #[test]
    fn store_load_edge_through_aliased_pointer() {
        let p = parse_program(
            "global g\n\
             func main(entry=b) {\n\
               block b { p = addr g ; v = const 7 ; store p, v ; q = addr g ; w = load q ; ret }\n\
             }",
        )
        .unwrap();
        let pts = points_to(&p);
        let cg = build_call_graph(&p, &pts);
        let vfg = build_vfg(&p, &pts, &cg);
        let id = ids(&p, &["main:b:2", "main:b:4"]);
        assert!(vfg.edges().contains(&(id[0], id[1])), "store->load edge missing");
    }

    #[test]
    fn interprocedural_value_chain() {
        // A value defined in `top` flows through two calls into `sink`'s use.
        let p = parse_program(
            "func top(entry=b) { block b { x = input 0 ; call mid x ; ret } }\n\
             func mid(entry=c, params=m) { block c { call sink m ; ret } }\n\
             func sink(entry=d, params=s) { block d { y = binop add s s ; ret } }",
        )
        .unwrap();
        let pts = points_to(&p);
        let cg = build_call_graph(&p, &pts);
        let vfg = build_vfg(&p, &pts, &cg);
        let id = ids(&p, &["top:b:0", "sink:d:0"]);
        assert!(vfg.edges().contains(&(id[0], id[1])), "def(x) -> use-in-sink edge missing");
    }

    #[test]
    fn return_value_flows_to_call_result() {
        let p = parse_program(
            "func main(entry=b) { block b { r = call make ; s = binop add r r ; ret } }\n\
             func make(entry=c) { block c { v = const 9 ; ret v } }",
        )
        .unwrap();
        let pts = points_to(&p);
        let cg = build_call_graph(&p, &pts);
        let vfg = build_vfg(&p, &pts, &cg);
        let id = ids(&p, &["make:c:0", "main:b:0", "main:b:1"]);
        let edges = vfg.edges();
        assert!(edges.contains(&(id[0], id[1])), "ret def -> call result missing");
        assert!(edges.contains(&(id[1], id[2])), "call result -> use missing");
    }

    #[test]
    fn vfg_edges_invariant_under_block_reordering() {
        let a = "func main(entry=b1) {\n\
                   block b1 { x = const 1 ; c = input 0 ; brcond c b2 b3 }\n\
                   block b2 { y = binop add x x ; br b3 }\n\
                   block b3 { z = binop mul x x ; ret }\n\
                 }";
        // Same blocks, different textual order.
        let b = "func main(entry=b1) {\n\
                   block b1 { x = const 1 ; c = input 0 ; brcond c b2 b3 }\n\
                   block b3 { z = binop mul x x ; ret }\n\
                   block b2 { y = binop add x x ; br b3 }\n\
                 }";
        let edges_of = |src: &str| {
            let p = parse_program(src).unwrap();
            let pts = points_to(&p);
            let cg = build_call_graph(&p, &pts);
            let vfg = build_vfg(&p, &pts, &cg);
            vfg.edges()
                .into_iter()
                .map(|(a, b)| (p.instr_name(a), p.instr_name(b)))
                .collect::<BTreeSet<_>>()
        };
        assert_eq!(edges_of(a), edges_of(b));
    }
}
