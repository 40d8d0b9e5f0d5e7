//! Havoc-style mutation. All randomness flows through [`CampaignRng`], a
//! ChaCha8 stream seeded from the campaign config, so a campaign replays
//! byte-identically from its seed.

use rand_core::{RngCore, SeedableRng};

pub struct CampaignRng(rand_chacha::ChaCha8Rng);

impl CampaignRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15)).to_le_bytes());
        }
        CampaignRng(rand_chacha::ChaCha8Rng::from_seed(key))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform-ish value in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    pub fn byte(&mut self) -> u8 {
        (self.next_u64() & 0xff) as u8
    }

    pub fn chance(&mut self, num: u32, denom: u32) -> bool {
        (self.next_u64() % denom as u64) < num as u64
    }
}

/// Limits for one havoc batch.
#[derive(Debug, Clone, Copy)]
pub struct MutateLimits {
    pub max_len: usize,
    pub max_stack: u32,
}

impl Default for MutateLimits {
    fn default() -> Self {
        MutateLimits { max_len: 4096, max_stack: 8 }
    }
}

/// Derives `energy` children from `parent`, each through 1..=max_stack
/// stacked operations. `corpus` supplies splice partners. Children never
/// exceed `max_len`; a child mutated down to nothing becomes a single random
/// byte.
pub fn havoc_batch(
    parent: &[u8],
    energy: u32,
    rng: &mut CampaignRng,
    corpus: &[&[u8]],
    limits: MutateLimits,
) -> Vec<Vec<u8>> {
    let mut out = Vec::with_capacity(energy as usize);
    for _ in 0..energy {
        let mut child = parent.to_vec();
        let stack = 1 + rng.below(limits.max_stack as usize) as u32;
        for _ in 0..stack {
            mutate_once(&mut child, rng, corpus, limits.max_len);
        }
        if child.is_empty() {
            child.push(rng.byte());
        }
        child.truncate(limits.max_len);
        out.push(child);
    }
    out
}

fn mutate_once(data: &mut Vec<u8>, rng: &mut CampaignRng, corpus: &[&[u8]], max_len: usize) {
    match rng.below(7) {
        // bit flip
        0 => {
            if data.is_empty() {
                return;
            }
            let pos = rng.below(data.len());
            data[pos] ^= 1 << rng.below(8);
        }
        // byte set
        1 => {
            if data.is_empty() {
                return;
            }
            let pos = rng.below(data.len());
            data[pos] = rng.byte();
        }
        // byte add/sub up to 35
        2 => {
            if data.is_empty() {
                return;
            }
            let pos = rng.below(data.len());
            let delta = (1 + rng.below(35)) as u8;
            data[pos] = if rng.chance(1, 2) {
                data[pos].wrapping_add(delta)
            } else {
                data[pos].wrapping_sub(delta)
            };
        }
        // byte insert
        3 => {
            if data.len() >= max_len {
                return;
            }
            let pos = rng.below(data.len() + 1);
            let b = rng.byte();
            data.insert(pos, b);
        }
        // byte delete
        4 => {
            if data.is_empty() {
                return;
            }
            let pos = rng.below(data.len());
            data.remove(pos);
        }
        // block duplicate
        5 => {
            if data.is_empty() || data.len() >= max_len {
                return;
            }
            let start = rng.below(data.len());
            let max_block = (data.len() - start).min(128).min(max_len - data.len());
            if max_block == 0 {
                return;
            }
            let len = 1 + rng.below(max_block);
            let block: Vec<u8> = data[start..start + len].to_vec();
            let at = rng.below(data.len() + 1);
            for (i, b) in block.into_iter().enumerate() {
                data.insert(at + i, b);
            }
        }
        // splice with a random corpus seed
        _ => {
            if corpus.is_empty() {
                return;
            }
            let other = corpus[rng.below(corpus.len())];
            if other.is_empty() {
                return;
            }
            let cut_a = rng.below(data.len() + 1);
            let cut_b = rng.below(other.len());
            data.truncate(cut_a);
            data.extend_from_slice(&other[cut_b..]);
            data.truncate(max_len);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_size_equals_energy() {
        let mut rng = CampaignRng::new(1);
        let out = havoc_batch(b"abcd", 5, &mut rng, &[], MutateLimits::default());
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn fixed_seed_reproduces_batch() {
        let corpus: Vec<&[u8]> = vec![b"seed one", b"two"];
        let a = havoc_batch(b"parent", 32, &mut CampaignRng::new(7), &corpus, MutateLimits::default());
        let b = havoc_batch(b"parent", 32, &mut CampaignRng::new(7), &corpus, MutateLimits::default());
        assert_eq!(a, b);
        let c = havoc_batch(b"parent", 32, &mut CampaignRng::new(8), &corpus, MutateLimits::default());
        assert_ne!(a, c);
    }

    #[test]
    fn children_respect_max_len_and_are_non_empty() {
        let limits = MutateLimits { max_len: 16, max_stack: 8 };
        let mut rng = CampaignRng::new(42);
        let parent = vec![0u8; 16];
        for child in havoc_batch(&parent, 500, &mut rng, &[b"0123456789abcdef"], limits) {
            assert!(child.len() <= 16);
            assert!(!child.is_empty());
        }
    }

    #[test]
    fn empty_parent_children_become_single_byte() {
        let mut rng = CampaignRng::new(3);
        for child in havoc_batch(b"", 50, &mut rng, &[], MutateLimits::default()) {
            assert!(!child.is_empty());
        }
    }
}
