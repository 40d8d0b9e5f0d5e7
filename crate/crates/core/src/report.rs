//! Analysis pipeline assembly and machine-readable outputs: the analyze
//! report, the campaign report, the replay record, and Graphviz dumps.
//! All JSON is schema-versioned and serialized in a stable order so equal
//! runs produce byte-identical files.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::analysis::{
    build_call_graph, build_vfg, points_to, CallGraph, PointsToMap, ValueFlowGraph,
};
use crate::distance::{
    backward_step_distances, call_site_depths, combine_targets, function_level_distances,
    BlockDistances, CombinedDistances,
};
use crate::fuzzer::{Campaign, CampaignConfig};
use crate::hash::hex_digest;
use crate::ir::{pretty_print, resolve_target, Program, TargetError, TargetSpec};
use crate::runtime::{
    build_plan, full_plan, ExecOutcome, ExecutionFeedback, InstrumentationPlan,
};
use crate::slicing::{
    boundary_blocks, control_flow_slice, hybrid_slice, value_flow_slice, BoundarySet, SliceSet,
};
use crate::valueflow::{vfb, vfd_maps, vfi, VfbMap, VfdMaps, VfiMap};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything the static analyzer derives for a program and target set.
pub struct AnalysisProducts {
    pub target_strings: Vec<String>,
    pub targets: Vec<TargetSpec>,
    pub pts: PointsToMap,
    pub call_graph: CallGraph,
    pub vfg: ValueFlowGraph,
    pub control_slice: SliceSet,
    pub value_slice: SliceSet,
    pub slice: SliceSet,
    pub boundary: BoundarySet,
    pub per_target: Vec<BlockDistances>,
    pub combined: CombinedDistances,
    /// Function-level fallback distances (the coarse variant).
    pub approx_combined: CombinedDistances,
    pub vfd: VfdMaps,
    pub vfi: VfiMap,
    pub vfb: VfbMap,
    /// True when every target function is reachable from the entry function.
    pub reachable: bool,
    pub diagnostics: Vec<String>,
}

/// Runs the full static pipeline. Multi-target slices are unions of the
/// per-target slices; distances combine harmonically.
pub fn analyze_program(
    program: &Program,
    target_strings: &[String],
) -> Result<AnalysisProducts, TargetError> {
    let targets: Vec<TargetSpec> = target_strings
        .iter()
        .map(|s| resolve_target(program, s))
        .collect::<Result<_, _>>()?;

    let pts = points_to(program);
    let call_graph = build_call_graph(program, &pts);
    let vfg = build_vfg(program, &pts, &call_graph);

    let mut diagnostics: Vec<String> = call_graph
        .unresolved_sites
        .iter()
        .map(|s| format!("unresolved indirect call at {}", program.instr_name(*s)))
        .collect();

    let mut control = SliceSet::default();
    let mut value = SliceSet::default();
    let mut reachable = true;
    for (t, s) in targets.iter().zip(target_strings) {
        let sc = control_flow_slice(program, &call_graph, t);
        if !sc.functions.contains(&program.entry) {
            reachable = false;
            diagnostics.push(format!("unreachable target {s}"));
        }
        control = hybrid_slice(&control, &sc);
        let sv = value_flow_slice(program, &pts, &call_graph, &vfg, t);
        value = hybrid_slice(&value, &sv);
    }
    let slice = hybrid_slice(&control, &value);
    let boundary = boundary_blocks(program, &slice);

    let per_target: Vec<BlockDistances> = targets
        .iter()
        .map(|t| backward_step_distances(program, &call_graph, t))
        .collect();
    let combined = combine_targets(&per_target);
    let approx_per_target: Vec<BlockDistances> = targets
        .iter()
        .map(|t| function_level_distances(program, &call_graph, t))
        .collect();
    let approx_combined = combine_targets(&approx_per_target);

    let vfd = vfd_maps(program, &pts, &call_graph, &vfg, &targets);
    let vfi_map = vfi(&vfd);
    let vfb_map = vfb(&vfi_map);

    Ok(AnalysisProducts {
        target_strings: target_strings.to_vec(),
        targets,
        pts,
        call_graph,
        vfg,
        control_slice: control,
        value_slice: value,
        slice,
        boundary,
        per_target,
        combined,
        approx_combined,
        vfd,
        vfi: vfi_map,
        vfb: vfb_map,
        reachable,
        diagnostics,
    })
}

/// Builds the instrumentation plan a campaign will run under, honoring the
/// ablation switches: `use_distance` picks the distance map, `use_value`
/// keeps or drops the vfb channel, `use_selective` picks slice-scoped or
/// whole-program instrumentation.
pub fn assemble_plan(
    program: &Program,
    products: &AnalysisProducts,
    config: &CampaignConfig,
) -> Result<(InstrumentationPlan, Vec<String>), crate::runtime::PlanError> {
    let distances = if config.use_distance {
        &products.combined
    } else {
        &products.approx_combined
    };
    let vfb_channel = if config.use_value {
        products.vfb.clone()
    } else {
        VfbMap::new()
    };
    if config.use_selective {
        build_plan(
            &products.slice,
            &products.boundary.blocks,
            &vfb_channel,
            distances,
            config.bitmap_size,
        )
    } else {
        full_plan(program, &vfb_channel, distances, config.bitmap_size).map(|p| (p, Vec::new()))
    }
}

pub fn program_digest(program: &Program) -> String {
    hex_digest(&pretty_print(program))
}

fn per_target_distance_row(
    products: &AnalysisProducts,
    block: crate::ir::BlockId,
) -> Vec<Value> {
    products
        .per_target
        .iter()
        .map(|m| m.get(&block).map_or(Value::Null, |d| json!(d)))
        .collect()
}

/// The analyze report: call graph, VFG summary, slice membership, boundary
/// flags, distances, and value-flow scores per block.
pub fn analyze_report(program: &Program, products: &AnalysisProducts) -> Value {
    let call_edges: Vec<Value> = products
        .call_graph
        .edges
        .iter()
        .map(|e| {
            json!({
                "caller": program.func(e.caller).name,
                "site": program.instr_name(e.site),
                "callee": program.func(e.callee).name,
            })
        })
        .collect();

    let mut blocks = Vec::new();
    for b in program.all_blocks() {
        let depths = call_site_depths(program.func(b.func));
        let slice_kind = products.slice.blocks.get(&b).map(|p| json!(p));
        blocks.push(json!({
            "block": program.block_name(b),
            "sliced": slice_kind.unwrap_or(Value::Null),
            "boundary": products.boundary.blocks.contains(&b),
            "call_site_depth": depths.get(&b.block).map_or(Value::Null, |d| json!(d)),
            "distance_per_target": per_target_distance_row(products, b),
            "distance_combined": products.combined.get(&b).map_or(Value::Null, |d| json!(d)),
            "vfb": products.vfb.get(&b).map_or(Value::Null, |v| json!(v)),
        }));
    }

    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "analyze",
        "program_digest": program_digest(program),
        "entry_function": program.func(program.entry).name,
        "targets": products.target_strings,
        "target_reachable": products.reachable,
        "call_graph": {
            "nodes": program.functions.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
            "edges": call_edges,
        },
        "vfg": {
            "node_count": products.vfg.node_count(),
            "edge_count": products.vfg.edge_count(),
        },
        "max_vfd": products.vfd.max_vfd,
        "blocks": blocks,
        "diagnostics": products.diagnostics,
    })
}

/// The campaign report: config echo, stats, crash list, queue snapshot.
pub fn campaign_report(program: &Program, campaign: &Campaign) -> Value {
    let queue: Vec<Value> = campaign
        .queue()
        .iter()
        .map(|s| serde_json::to_value(s).expect("seed serializes"))
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "campaign",
        "program_digest": program_digest(program),
        "config": serde_json::to_value(campaign.config()).expect("config serializes"),
        "stats": serde_json::to_value(campaign.stats()).expect("stats serialize"),
        "queue": queue,
    })
}

fn outcome_json(program: &Program, outcome: &ExecOutcome) -> Value {
    match outcome {
        ExecOutcome::Ok => json!({"kind": "ok"}),
        ExecOutcome::Crash { kind, location } => json!({
            "kind": "crash",
            "crash": kind,
            "location": program.instr_name(*location),
        }),
        ExecOutcome::StepLimit => json!({"kind": "step-limit"}),
        ExecOutcome::InputExhausted => json!({"kind": "input-exhausted"}),
    }
}

/// The replay record: outcome, block trace, and the feedback channels.
pub fn replay_report(
    program: &Program,
    outcome: &ExecOutcome,
    feedback: &ExecutionFeedback,
    trace: &[crate::ir::BlockId],
) -> Value {
    let coverage: Vec<Value> = feedback
        .bitmap
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0)
        .map(|(i, &b)| json!([i, b]))
        .collect();
    let hits: Vec<String> = feedback
        .boundary_hits
        .iter()
        .map(|b| program.block_name(*b))
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "replay",
        "outcome": outcome_json(program, outcome),
        "trace": trace.iter().map(|b| program.block_name(*b)).collect::<Vec<_>>(),
        "feedback": {
            "coverage": coverage,
            "boundary_hits": hits,
            "seed_distance": feedback.seed_distance().map_or(Value::Null, |d| json!(d)),
            "vfs": feedback.vfs_sum,
            "exec_steps": feedback.exec_steps,
        },
    })
}

/// Graphviz rendering of the call graph.
pub fn dot_call_graph(program: &Program, cg: &CallGraph) -> String {
    let mut out = String::from("digraph callgraph {\n");
    for f in &program.functions {
        out.push_str(&format!("  \"{}\";\n", f.name));
    }
    for e in &cg.edges {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
            program.func(e.caller).name,
            program.func(e.callee).name,
            program.instr_name(e.site)
        ));
    }
    out.push_str("}\n");
    out
}

/// Graphviz rendering of the value-flow graph.
pub fn dot_vfg(program: &Program, vfg: &ValueFlowGraph) -> String {
    let mut out = String::from("digraph vfg {\n");
    for n in &vfg.nodes {
        out.push_str(&format!("  \"{}\";\n", program.instr_name(*n)));
    }
    for (a, b) in vfg.edges() {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\";\n",
            program.instr_name(a),
            program.instr_name(b)
        ));
    }
    out.push_str("}\n");
    out
}

/// Blocks in the slice but outside the full block set make no sense; used by
/// tests and the CLI to double-check report consistency.
pub fn report_is_consistent(products: &AnalysisProducts) -> bool {
    let sliced: BTreeSet<_> = products.slice.blocks.keys().collect();
    products.boundary.blocks.iter().all(|b| sliced.contains(b))
}
