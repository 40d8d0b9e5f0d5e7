//! The campaign loop: pop the next queued seed cyclically, allocate energy,
//! mutate, execute the children, keep the interesting ones, and record
//! crashes with their time to exposure.
//!
//! In virtual-time mode the clock is the execution counter and `t_x` /
//! `time_budget` are denominated in executions, which makes whole campaigns
//! reproducible bit-for-bit from the rng seed.

use std::collections::BTreeMap;
use std::time::Instant;

use super::mutate::{havoc_batch, CampaignRng, MutateLimits};
use super::queue::SeedQueue;
use super::{
    clamp_energy, energy_afl, energy_distance, energy_vfs, normalize, t_exp, to_hex, KeepReason,
    Seed,
};
use crate::ir::{InstrId, Program};
use crate::runtime::{execute, CrashKind, ExecOutcome, ExecutionFeedback, InstrumentationPlan};

#[derive(Debug, Clone, serde::Serialize)]
pub struct CampaignConfig {
    /// Executions in virtual-time mode, seconds otherwise.
    pub time_budget: u64,
    /// Time-to-exploitation for the cooling schedule, same unit as the budget.
    pub t_x: f64,
    pub rng_seed: u64,
    pub step_limit: u64,
    pub bitmap_size: usize,
    pub use_distance: bool,
    pub use_value: bool,
    pub use_selective: bool,
    pub stop_on_first_crash: bool,
    pub virtual_time: bool,
    pub max_input_len: usize,
    pub initial_seed_len: usize,
    pub havoc_max_stack: u32,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            time_budget: 100_000,
            t_x: 5_000.0,
            rng_seed: 1,
            step_limit: 100_000,
            bitmap_size: crate::runtime::DEFAULT_BITMAP_SIZE,
            use_distance: true,
            use_value: true,
            use_selective: true,
            stop_on_first_crash: false,
            virtual_time: true,
            max_input_len: 4096,
            initial_seed_len: 4,
            havoc_max_stack: 8,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("t_x must be positive")]
    NonPositiveTx,
    #[error("time budget must be positive")]
    ZeroBudget,
    #[error("step limit must be positive")]
    ZeroStepLimit,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.t_x.is_nan() || self.t_x <= 0.0 {
            return Err(ConfigError::NonPositiveTx);
        }
        if self.time_budget == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        if self.step_limit == 0 {
            return Err(ConfigError::ZeroStepLimit);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CrashRecord {
    pub input_hex: String,
    pub kind: CrashKind,
    pub location: String,
    /// Executions from campaign start to the first occurrence of this key.
    pub tte_execs: u64,
    /// Wall-clock seconds to first occurrence; 0 in virtual-time mode.
    pub tte_seconds: f64,
    /// Total occurrences of this crash key.
    pub hits: u64,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct CampaignStats {
    pub executions: u64,
    pub total_steps: u64,
    /// Deduplicated crashes, first occurrence per (location, kind) key.
    pub crashes: Vec<CrashRecord>,
    pub crash_total: u64,
    /// (executions, queue length) sampled at every insertion.
    pub queue_growth: Vec<(u64, usize)>,
    pub min_vfs: Option<f64>,
    pub max_vfs: Option<f64>,
    pub min_distance: Option<f64>,
    pub max_distance: Option<f64>,
    pub max_covered_slots: u32,
    pub end_reason: Option<String>,
}

pub struct Campaign<'a> {
    program: &'a Program,
    plan: InstrumentationPlan,
    config: CampaignConfig,
    rng: CampaignRng,
    queue: SeedQueue,
    virgin: Vec<u8>,
    stats: CampaignStats,
    crash_index: BTreeMap<(InstrId, CrashKind), usize>,
    next_seed_id: u64,
    stopped: bool,
    started: Instant,
}

impl<'a> Campaign<'a> {
    pub fn new(
        program: &'a Program,
        plan: InstrumentationPlan,
        config: CampaignConfig,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut c = Campaign {
            program,
            virgin: vec![0u8; plan.bitmap_size],
            plan,
            rng: CampaignRng::new(config.rng_seed),
            queue: SeedQueue::default(),
            stats: CampaignStats::default(),
            crash_index: BTreeMap::new(),
            next_seed_id: 0,
            stopped: false,
            started: Instant::now(),
            config,
        };
        let initial = vec![0u8; c.config.initial_seed_len];
        c.evaluate(initial, true);
        Ok(c)
    }

    pub fn queue(&self) -> &SeedQueue {
        &self.queue
    }

    pub fn stats(&self) -> &CampaignStats {
        &self.stats
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn plan(&self) -> &InstrumentationPlan {
        &self.plan
    }

    pub fn elapsed(&self) -> f64 {
        if self.config.virtual_time {
            self.stats.executions as f64
        } else {
            self.started.elapsed().as_secs_f64()
        }
    }

    fn budget_exhausted(&self) -> bool {
        self.elapsed() >= self.config.time_budget as f64
    }

    pub fn temperature(&self) -> f64 {
        t_exp(self.elapsed(), self.config.t_x)
    }

    /// The mutation count the schedule allocates to `seed` right now.
    pub fn energy_of(&self, seed: &Seed) -> u32 {
        let t = self.temperature();
        let avg_steps = if self.stats.executions == 0 {
            seed.exec_steps as f64
        } else {
            self.stats.total_steps as f64 / self.stats.executions as f64
        };
        let p_afl = energy_afl(seed, avg_steps, self.stats.max_covered_slots);
        let p_dist = if self.config.use_distance {
            let nd = match seed.distance {
                Some(d) => normalize(
                    d,
                    self.stats.min_distance.unwrap_or(0.0),
                    self.stats.max_distance.unwrap_or(0.0),
                ),
                None => 1.0,
            };
            energy_distance(nd, t)
        } else {
            1.0
        };
        let p_vfs = if self.config.use_value {
            let nv = normalize(
                seed.vfs,
                self.stats.min_vfs.unwrap_or(0.0),
                self.stats.max_vfs.unwrap_or(0.0),
            );
            energy_vfs(nv, t)
        } else {
            1.0
        };
        clamp_energy(p_afl * p_dist * p_vfs)
    }

    /// Retention policy over one execution's results.
    pub fn is_interesting(
        &self,
        feedback: &ExecutionFeedback,
        outcome: &ExecOutcome,
    ) -> Option<KeepReason> {
        if outcome.is_crash() {
            return Some(KeepReason::Crash);
        }
        if feedback
            .bitmap
            .iter()
            .zip(&self.virgin)
            .any(|(&cur, &seen)| cur & !seen != 0)
        {
            return Some(KeepReason::NewCoverage);
        }
        if let Some(d) = feedback.seed_distance() {
            let queue_min = self.queue.min_distance().unwrap_or(f64::INFINITY);
            if d < queue_min {
                return Some(KeepReason::CloserDistance);
            }
        }
        let max_vfs = self.stats.max_vfs.unwrap_or(f64::NEG_INFINITY);
        if feedback.vfs_sum > max_vfs {
            return Some(KeepReason::HigherVfs);
        }
        None
    }

    fn evaluate(&mut self, bytes: Vec<u8>, is_initial: bool) {
        self.stats.executions += 1;
        let (outcome, feedback) = execute(self.program, &bytes, &self.plan, self.config.step_limit);
        self.stats.total_steps += feedback.exec_steps;
        if let ExecOutcome::Crash { kind, location } = outcome {
            self.record_crash(&bytes, kind, location);
            if self.config.stop_on_first_crash {
                self.stopped = true;
                self.stats.end_reason = Some("first-crash".into());
            }
            if !is_initial {
                return;
            }
            // fall through: initial seeds root the corpus even when they crash
        } else if !is_initial && self.is_interesting(&feedback, &outcome).is_none() {
            return;
        }
        self.admit(bytes, &feedback);
    }

    fn admit(&mut self, bytes: Vec<u8>, feedback: &ExecutionFeedback) {
        let signature: Vec<(u32, u8)> = feedback
            .bitmap
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(i, &b)| (i as u32, b))
            .collect();
        for (i, b) in &signature {
            self.virgin[*i as usize] |= b;
        }
        let seed = Seed {
            id: self.next_seed_id,
            bytes,
            distance: feedback.seed_distance(),
            vfs: feedback.vfs_sum,
            signature,
            exec_steps: feedback.exec_steps,
            covered_slots: feedback.covered_slots(),
            discovery_exec: self.stats.executions,
        };
        self.next_seed_id += 1;
        if let Some(d) = seed.distance {
            self.stats.min_distance =
                Some(self.stats.min_distance.map_or(d, |m| m.min(d)));
            self.stats.max_distance =
                Some(self.stats.max_distance.map_or(d, |m| m.max(d)));
        }
        self.stats.min_vfs = Some(self.stats.min_vfs.map_or(seed.vfs, |m| m.min(seed.vfs)));
        self.stats.max_vfs = Some(self.stats.max_vfs.map_or(seed.vfs, |m| m.max(seed.vfs)));
        self.stats.max_covered_slots = self.stats.max_covered_slots.max(seed.covered_slots);
        self.queue.insert(seed);
        self.stats.queue_growth.push((self.stats.executions, self.queue.len()));
        debug_assert!(self.queue.order_holds());
    }

    fn record_crash(&mut self, bytes: &[u8], kind: CrashKind, location: InstrId) {
        self.stats.crash_total += 1;
        let key = (location, kind);
        match self.crash_index.get(&key) {
            Some(&idx) => self.stats.crashes[idx].hits += 1,
            None => {
                let record = CrashRecord {
                    input_hex: to_hex(bytes),
                    kind,
                    location: self.program.instr_name(location),
                    tte_execs: self.stats.executions,
                    tte_seconds: if self.config.virtual_time {
                        0.0
                    } else {
                        self.started.elapsed().as_secs_f64()
                    },
                    hits: 1,
                };
                self.crash_index.insert(key, self.stats.crashes.len());
                self.stats.crashes.push(record);
            }
        }
    }

    /// One scheduling round. Returns false once the campaign is over.
    pub fn step(&mut self) -> bool {
        if self.stopped || self.queue.is_empty() {
            return false;
        }
        if self.budget_exhausted() {
            self.stats.end_reason.get_or_insert_with(|| "budget-exhausted".into());
            return false;
        }
        let idx = self.queue.next_index();
        let energy = self.energy_of(self.queue.get(idx));
        let parent = self.queue.get(idx).bytes.clone();
        let corpus: Vec<&[u8]> = self.queue.iter().map(|s| s.bytes.as_slice()).collect();
        let limits = MutateLimits {
            max_len: self.config.max_input_len,
            max_stack: self.config.havoc_max_stack,
        };
        let batch = havoc_batch(&parent, energy, &mut self.rng, &corpus, limits);
        for child in batch {
            if self.budget_exhausted() {
                self.stats.end_reason.get_or_insert_with(|| "budget-exhausted".into());
                return false;
            }
            self.evaluate(child, false);
            if self.stopped {
                return false;
            }
        }
        true
    }

    pub fn run(&mut self) {
        while self.step() {}
        self.stats.end_reason.get_or_insert_with(|| "budget-exhausted".into());
    }
}

/// Runs a full campaign to completion and returns it for inspection.
pub fn run_campaign<'a>(
    program: &'a Program,
    plan: InstrumentationPlan,
    config: CampaignConfig,
) -> Result<Campaign<'a>, ConfigError> {
    let mut c = Campaign::new(program, plan, config)?;
    c.run();
    Ok(c)
}
