//! Seed scheduling and energy allocation.
//!
//! Seeds are prioritized by control-flow distance in a circular queue. The
//! energy of a scheduled seed is a product of three terms: an AFL-style
//! coverage/speed base, an annealed distance term, and an annealed value-flow
//! term. Both annealed terms share AFLGo's exponential cooling schedule, so a
//! campaign explores first and exploits later.

pub mod campaign;
pub mod mutate;
mod queue;

pub use campaign::{run_campaign, Campaign, CampaignConfig, CampaignStats, ConfigError, CrashRecord};
pub use mutate::{havoc_batch, CampaignRng, MutateLimits};
pub use queue::SeedQueue;

pub const ENERGY_MIN: u32 = 1;
pub const ENERGY_MAX: u32 = 4096;
pub const AFL_BASE_ENERGY: f64 = 16.0;

/// A queued input with its evaluated feedback digest.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Seed {
    pub id: u64,
    #[serde(serialize_with = "ser_hex")]
    pub bytes: Vec<u8>,
    /// Mean combined distance over distinct boundary blocks hit; absent when
    /// the trace touched none.
    pub distance: Option<f64>,
    pub vfs: f64,
    /// Sparse classified coverage: (bitmap index, bucket).
    pub signature: Vec<(u32, u8)>,
    pub exec_steps: u64,
    pub covered_slots: u32,
    pub discovery_exec: u64,
}

fn ser_hex<S: serde::Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_hex(bytes))
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn from_hex(text: &str) -> Option<Vec<u8>> {
    if !text.len().is_multiple_of(2) {
        return None;
    }
    (0..text.len() / 2)
        .map(|i| u8::from_str_radix(&text[2 * i..2 * i + 2], 16).ok())
        .collect()
}

/// AFLGo's exponential cooling schedule: 20^(-elapsed / t_x), in (0, 1].
/// Clamped above the f64 underflow so the range contract survives extreme
/// elapsed/t_x ratios.
pub fn t_exp(elapsed: f64, t_x: f64) -> f64 {
    debug_assert!(t_x > 0.0 && elapsed >= 0.0);
    20f64.powf(-(elapsed / t_x)).max(f64::MIN_POSITIVE)
}

/// Min-max normalization with the degenerate range pinned to 0.5.
pub fn normalize(value: f64, min: f64, max: f64) -> f64 {
    if max <= min {
        0.5
    } else {
        ((value - min) / (max - min)).clamp(0.0, 1.0)
    }
}

/// Annealed value-flow energy: 2^(10 * nvfs * (1 - T) + 0.5 T - 5).
pub fn energy_vfs(vfs_normalized: f64, temperature: f64) -> f64 {
    2f64.powf(10.0 * vfs_normalized * (1.0 - temperature) + 0.5 * temperature - 5.0)
}

/// Annealed distance energy, mirrored so smaller distances earn more:
/// 2^(10 * (1 - nd) * (1 - T) + 0.5 T - 5).
pub fn energy_distance(distance_normalized: f64, temperature: f64) -> f64 {
    2f64.powf(10.0 * (1.0 - distance_normalized) * (1.0 - temperature) + 0.5 * temperature - 5.0)
}

/// The AFL-style base: 16 mutations scaled by execution speed and slice
/// coverage, both clamped.
pub fn energy_afl(seed: &Seed, avg_exec_steps: f64, max_covered_slots: u32) -> f64 {
    let speed = if seed.exec_steps == 0 {
        1.0
    } else {
        (avg_exec_steps / seed.exec_steps as f64).clamp(0.25, 4.0)
    };
    let coverage = if max_covered_slots == 0 {
        1.0
    } else {
        (seed.covered_slots as f64 / max_covered_slots as f64).clamp(0.25, 1.0)
    };
    AFL_BASE_ENERGY * speed * coverage
}

/// Rounds and clamps the product of the three terms into a mutation count.
pub fn clamp_energy(product: f64) -> u32 {
    (product.round() as i64).clamp(ENERGY_MIN as i64, ENERGY_MAX as i64) as u32
}

/// Why an input was kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepReason {
    NewCoverage,
    CloserDistance,
    HigherVfs,
    Crash,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cooling_schedule_fixed_points() {
        assert!((t_exp(0.0, 10.0) - 1.0).abs() < 1e-12);
        assert!((t_exp(10.0, 10.0) - 0.05).abs() < 1e-12);
        assert!((t_exp(20.0, 10.0) - 0.0025).abs() < 1e-12);
    }

    #[test]
    fn normalization_extremes_and_degenerate_range() {
        assert_eq!(normalize(3.0, 3.0, 9.0), 0.0);
        assert_eq!(normalize(9.0, 3.0, 9.0), 1.0);
        assert_eq!(normalize(5.0, 5.0, 5.0), 0.5);
    }

    #[test]
    fn vfs_energy_closed_forms() {
        // temperature 1: exponent collapses to 0.5 - 5 regardless of score
        let expect = 2f64.powf(-4.5);
        for v in [0.0, 0.3, 1.0] {
            assert!((energy_vfs(v, 1.0) - expect).abs() < 1e-12);
        }
        // temperature -> 0: extremes 32 and 2^-5
        assert!((energy_vfs(1.0, 1e-12) - 32.0).abs() < 1e-9);
        assert!((energy_vfs(0.0, 1e-12) - 0.03125).abs() < 1e-9);
    }

    #[test]
    fn distance_energy_closed_forms() {
        let expect = 2f64.powf(-4.5);
        for d in [0.0, 0.5, 1.0] {
            assert!((energy_distance(d, 1.0) - expect).abs() < 1e-12);
        }
        assert!((energy_distance(0.0, 1e-12) - 32.0).abs() < 1e-9);
        assert!((energy_distance(1.0, 1e-12) - 0.03125).abs() < 1e-9);
    }

    #[test]
    fn energy_monotonicity() {
        let t = 0.2;
        let mut last = -1.0;
        for i in 0..=10 {
            let v = energy_vfs(i as f64 / 10.0, t);
            assert!(v > last);
            last = v;
        }
        let mut last = f64::INFINITY;
        for i in 0..=10 {
            let v = energy_distance(i as f64 / 10.0, t);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn afl_energy_factors() {
        let mut s = Seed {
            id: 0,
            bytes: vec![],
            distance: None,
            vfs: 0.0,
            signature: vec![],
            exec_steps: 100,
            covered_slots: 10,
            discovery_exec: 0,
        };
        // average speed, max coverage
        assert_eq!(energy_afl(&s, 100.0, 10), 16.0);
        // 4x slower than average, max coverage
        assert_eq!(energy_afl(&s, 25.0, 10), 4.0);
        // speed clamps at 4x
        assert_eq!(energy_afl(&s, 100_000.0, 10), 64.0);
        // coverage clamps at 0.25
        s.covered_slots = 0;
        assert_eq!(energy_afl(&s, 100.0, 10), 4.0);
    }

    #[test]
    fn clamp_floor_and_ceiling() {
        assert_eq!(clamp_energy(0.01), 1);
        assert_eq!(clamp_energy(16.0 * 32.0 * 32.0), 4096);
        assert_eq!(clamp_energy(31.6), 32);
    }

    #[test]
    fn hex_round_trip() {
        let data = vec![0u8, 255, 16, 1];
        assert_eq!(from_hex(&to_hex(&data)).unwrap(), data);
        assert!(from_hex("abc").is_none());
    }

    proptest::proptest! {
        #[test]
        fn temperature_stays_in_unit_interval(elapsed in 0.0f64..1e7, t_x in 1e-3f64..1e6) {
            let t = t_exp(elapsed, t_x);
            proptest::prop_assert!(t > 0.0 && t <= 1.0);
        }

        #[test]
        fn annealed_terms_ordered_by_inputs(
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
            t in 1e-6f64..1.0,
        ) {
            // more influence never hurts; more distance never helps
            if a < b {
                proptest::prop_assert!(energy_vfs(a, t) <= energy_vfs(b, t));
                proptest::prop_assert!(energy_distance(a, t) >= energy_distance(b, t));
            }
        }

        #[test]
        fn clamped_energy_is_a_valid_mutation_count(product in -1e9f64..1e9) {
            let e = clamp_energy(product);
            proptest::prop_assert!((ENERGY_MIN..=ENERGY_MAX).contains(&e));
        }
    }
}
