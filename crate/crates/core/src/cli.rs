//! Command implementations behind the `tirfuzz` binary. Each returns a
//! process exit code: 0 success, 1 parse/validation/IO/config errors,
//! 2 analysis results that block fuzzing (unreachable target), 3 crash on
//! replay.

use std::fs;
use std::path::{Path, PathBuf};

use crate::fuzzer::{run_campaign, CampaignConfig};
use crate::ir::parse_program;
use crate::report::{
    analyze_program, analyze_report, assemble_plan, campaign_report, dot_call_graph, dot_vfg,
    replay_report,
};
use crate::runtime::execute_with_trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BLOCKED: i32 = 2;
pub const EXIT_CRASH: i32 = 3;

/// Flag-level overrides for a fuzzing campaign; unset fields fall back to the
/// config file, then to defaults.
#[derive(Debug, Default, Clone)]
pub struct FuzzOverrides {
    pub seed: Option<u64>,
    pub time_budget: Option<u64>,
    pub t_x: Option<f64>,
    pub step_limit: Option<u64>,
    pub bitmap_size: Option<usize>,
    pub virtual_time: bool,
    pub stop_on_first_crash: bool,
    pub ablation: Option<String>,
    pub seed_len: Option<usize>,
    pub max_input_len: Option<usize>,
}

/// Key-value campaign config files: one `key = value` per line, `#` comments.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("config line {}: expected `key = value`", lineno + 1));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn apply_config_entries(
    config: &mut CampaignConfig,
    entries: &[(String, String)],
) -> Result<(), String> {
    for (k, v) in entries {
        let bad = || format!("config key `{k}`: invalid value `{v}`");
        match k.as_str() {
            "seed" => config.rng_seed = v.parse().map_err(|_| bad())?,
            "time_budget" => config.time_budget = v.parse().map_err(|_| bad())?,
            "t_x" => config.t_x = v.parse().map_err(|_| bad())?,
            "step_limit" => config.step_limit = v.parse().map_err(|_| bad())?,
            "bitmap_size" => config.bitmap_size = v.parse().map_err(|_| bad())?,
            "virtual_time" => config.virtual_time = v.parse().map_err(|_| bad())?,
            "stop_on_first_crash" => {
                config.stop_on_first_crash = v.parse().map_err(|_| bad())?
            }
            "seed_len" => config.initial_seed_len = v.parse().map_err(|_| bad())?,
            "max_input_len" => config.max_input_len = v.parse().map_err(|_| bad())?,
            "havoc_max_stack" => config.havoc_max_stack = v.parse().map_err(|_| bad())?,
            "ablation" => apply_ablation(config, v)?,
            other => return Err(format!("unknown config key `{other}`")),
        }
    }
    Ok(())
}

pub fn apply_ablation(config: &mut CampaignConfig, name: &str) -> Result<(), String> {
    match name {
        "none" => {}
        "nodist" => config.use_distance = false,
        "novalue" => config.use_value = false,
        "noselect" => config.use_selective = false,
        other => return Err(format!("unknown ablation `{other}` (nodist|novalue|noselect)")),
    }
    Ok(())
}

/// Builds the effective campaign config: defaults, then the config file,
/// then CLI overrides.
pub fn build_config(
    config_path: Option<&Path>,
    over: &FuzzOverrides,
) -> Result<CampaignConfig, String> {
    let mut config = CampaignConfig {
        virtual_time: false,
        time_budget: 60,
        t_x: 20.0,
        ..CampaignConfig::default()
    };
    if let Some(path) = config_path {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        apply_config_entries(&mut config, &parse_config_file(&text)?)?;
    }
    if let Some(s) = over.seed {
        config.rng_seed = s;
    }
    if let Some(b) = over.time_budget {
        config.time_budget = b;
    }
    if let Some(t) = over.t_x {
        config.t_x = t;
    }
    if let Some(l) = over.step_limit {
        config.step_limit = l;
    }
    if let Some(b) = over.bitmap_size {
        config.bitmap_size = b;
    }
    if let Some(l) = over.seed_len {
        config.initial_seed_len = l;
    }
    if let Some(l) = over.max_input_len {
        config.max_input_len = l;
    }
    if over.virtual_time {
        config.virtual_time = true;
    }
    if over.stop_on_first_crash {
        config.stop_on_first_crash = true;
    }
    if let Some(a) = &over.ablation {
        apply_ablation(&mut config, a)?;
    }
    Ok(config)
}

fn load_program(path: &Path) -> Result<crate::ir::Program, i32> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(EXIT_ERROR);
        }
    };
    match parse_program(&text) {
        Ok(p) => Ok(p),
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            Err(EXIT_ERROR)
        }
    }
}

/// `analyze`: run the static pipeline and write the report.
pub fn cmd_analyze(
    program_path: &Path,
    targets: &[String],
    out_path: Option<&Path>,
    dot_dir: Option<&Path>,
) -> i32 {
    let program = match load_program(program_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let products = match analyze_program(&program, targets) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let report = analyze_report(&program, &products);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match out_path {
        Some(path) => {
            if let Err(e) = fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_ERROR;
            }
        }
        None => println!("{text}"),
    }
    if let Some(dir) = dot_dir {
        if let Err(e) = fs::create_dir_all(dir)
            .and_then(|_| fs::write(dir.join("callgraph.dot"), dot_call_graph(&program, &products.call_graph)))
            .and_then(|_| fs::write(dir.join("vfg.dot"), dot_vfg(&program, &products.vfg)))
        {
            eprintln!("error: cannot write dot files: {e}");
            return EXIT_ERROR;
        }
    }
    if !products.reachable {
        for d in &products.diagnostics {
            eprintln!("blocked: {d}");
        }
        return EXIT_BLOCKED;
    }
    EXIT_OK
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '-' })
        .collect()
}

/// `fuzz`: run a campaign, write the report and the crash inputs.
pub fn cmd_fuzz(
    program_path: &Path,
    targets: &[String],
    config_path: Option<&Path>,
    out_dir: &Path,
    over: &FuzzOverrides,
) -> i32 {
    let program = match load_program(program_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let config = match build_config(config_path, over) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let products = match analyze_program(&program, targets) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    if !products.reachable {
        for d in &products.diagnostics {
            eprintln!("blocked: {d}");
        }
        return EXIT_BLOCKED;
    }
    let (plan, plan_diags) = match assemble_plan(&program, &products, &config) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    for d in &plan_diags {
        eprintln!("note: {d}");
    }
    let campaign = match run_campaign(&program, plan, config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_ERROR;
    }
    let report = campaign_report(&program, &campaign);
    let report_path = out_dir.join("report.json");
    if let Err(e) = fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap()) {
        eprintln!("error: cannot write {}: {e}", report_path.display());
        return EXIT_ERROR;
    }
    let crash_dir = out_dir.join("crashes");
    if let Err(e) = fs::create_dir_all(&crash_dir) {
        eprintln!("error: cannot create {}: {e}", crash_dir.display());
        return EXIT_ERROR;
    }
    for (i, crash) in campaign.stats().crashes.iter().enumerate() {
        let name = format!(
            "{i:04}__{}__{}.bin",
            sanitize(&crash.location),
            sanitize(serde_json::to_value(crash.kind).unwrap().as_str().unwrap_or("crash"))
        );
        let bytes = crate::fuzzer::from_hex(&crash.input_hex).unwrap_or_default();
        if let Err(e) = fs::write(crash_dir.join(name.clone()), bytes) {
            eprintln!("error: cannot write crash input {name}: {e}");
            return EXIT_ERROR;
        }
    }
    println!(
        "campaign done: {} executions, {} unique crash keys ({} crashes total), report at {}",
        campaign.stats().executions,
        campaign.stats().crashes.len(),
        campaign.stats().crash_total,
        report_path.display()
    );
    EXIT_OK
}

/// `replay`: execute one input and print outcome, trace, and feedback.
pub fn cmd_replay(
    program_path: &Path,
    targets: &[String],
    input_path: &Path,
    step_limit: u64,
) -> i32 {
    let program = match load_program(program_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let products = match analyze_program(&program, targets) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let config = CampaignConfig::default();
    let (plan, _) = match assemble_plan(&program, &products, &config) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let input = match fs::read(input_path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", input_path.display());
            return EXIT_ERROR;
        }
    };
    let (outcome, feedback, trace) = execute_with_trace(&program, &input, &plan, step_limit);
    let report = replay_report(&program, &outcome, &feedback, &trace);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if outcome.is_crash() {
        EXIT_CRASH
    } else {
        EXIT_OK
    }
}

/// Resolve a path relative to the current directory; split out for tests.
pub fn path_of(s: &str) -> PathBuf {
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parses_and_applies() {
        let entries = parse_config_file(
            "# campaign manifest\nseed = 7\nt_x = 50\nvirtual_time = true\nablation = novalue\n",
        )
        .unwrap();
        let mut config = CampaignConfig::default();
        apply_config_entries(&mut config, &entries).unwrap();
        assert_eq!(config.rng_seed, 7);
        assert_eq!(config.t_x, 50.0);
        assert!(config.virtual_time);
        assert!(!config.use_value);
        assert!(config.use_distance);
    }

    #[test]
    fn bad_config_lines_are_errors() {
        assert!(parse_config_file("nonsense without equals\n").is_err());
        let entries = parse_config_file("no_such_key = 3\n").unwrap();
        let mut config = CampaignConfig::default();
        assert!(apply_config_entries(&mut config, &entries).is_err());
        assert!(apply_ablation(&mut config, "nothing").is_err());
    }

    #[test]
    fn overrides_beat_config_file() {
        let over = FuzzOverrides {
            seed: Some(99),
            virtual_time: true,
            ablation: Some("nodist".into()),
            ..Default::default()
        };
        let config = build_config(None, &over).unwrap();
        assert_eq!(config.rng_seed, 99);
        assert!(config.virtual_time);
        assert!(!config.use_distance);
    }
}
