//! Chromosome mutation: stacked havoc edits and two-parent splicing.
//!
//! Havoc keeps the chromosome length fixed and applies `2^k` random edits,
//! `k` drawn uniformly from `0..=max_stack_exp`. Splice concatenates a
//! prefix of one parent with a suffix of another and is chosen with
//! probability `p_splice` per generated input.

use rand::Rng;

use crate::corpus::{Chromosome, ChromosomeOrigin, CorpusState};
use crate::rng::slot_stream;
use crate::{Error, Result};

/// Havoc knobs. Each enabled kind is drawn with equal probability per edit.
#[derive(Clone, Copy, Debug)]
pub struct HavocParams {
    /// Edits per call are `2^k` with `k` uniform in `0..=max_stack_exp`.
    pub max_stack_exp: u32,
    pub flip_bit: bool,
    pub overwrite_byte: bool,
    pub arith_byte: bool,
}

impl Default for HavocParams {
    fn default() -> Self {
        HavocParams {
            max_stack_exp: 6,
            flip_bit: true,
            overwrite_byte: true,
            arith_byte: true,
        }
    }
}

impl HavocParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.flip_bit || self.overwrite_byte || self.arith_byte) {
            return Err(Error::Config(
                "havoc needs at least one edit kind enabled".into(),
            ));
        }
        if self.max_stack_exp > 16 {
            return Err(Error::Config(format!(
                "max_stack_exp {} would stack 2^{} edits; limit is 16",
                self.max_stack_exp, self.max_stack_exp
            )));
        }
        Ok(())
    }

    fn enabled_kinds(&self) -> Vec<EditKind> {
        let mut kinds = Vec::with_capacity(3);
        if self.flip_bit {
            kinds.push(EditKind::FlipBit);
        }
        if self.overwrite_byte {
            kinds.push(EditKind::OverwriteByte);
        }
        if self.arith_byte {
            kinds.push(EditKind::ArithByte);
        }
        kinds
    }
}

#[derive(Clone, Copy, Debug)]
enum EditKind {
    FlipBit,
    OverwriteByte,
    ArithByte,
}

/// Largest add/sub delta applied by the arithmetic edit.
pub const ARITH_MAX_DELTA: u8 = 35;

/// Everything input generation needs besides the corpus itself.
#[derive(Clone, Copy, Debug)]
pub struct MutationParams {
    pub havoc: HavocParams,
    /// Probability that a generated input splices two parents instead of
    /// havocing one.
    pub p_splice: f64,
    /// Hard cap on chromosome length; splice output is truncated to it.
    pub max_chromosome_bytes: usize,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams {
            havoc: HavocParams::default(),
            p_splice: 0.25,
            max_chromosome_bytes: 4096,
        }
    }
}

impl MutationParams {
    pub fn validate(&self) -> Result<()> {
        self.havoc.validate()?;
        if !(0.0..=1.0).contains(&self.p_splice) {
            return Err(Error::Config(format!(
                "p_splice must be in [0, 1], got {}",
                self.p_splice
            )));
        }
        if self.max_chromosome_bytes == 0 {
            return Err(Error::Config("max_chromosome_bytes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Length-preserving stacked mutation. Empty input comes back empty.
pub fn havoc<R: Rng>(bytes: &[u8], params: &HavocParams, rng: &mut R) -> Vec<u8> {
    havoc_traced(bytes, params, rng, None)
}

/// Havoc with an optional record of the byte positions edited, for tests
/// that check edit-site statistics. Draw order per edit is fixed: position,
/// kind, then the kind's own draws.
pub(crate) fn havoc_traced<R: Rng>(
    bytes: &[u8],
    params: &HavocParams,
    rng: &mut R,
    mut trace: Option<&mut Vec<usize>>,
) -> Vec<u8> {
    let mut out = bytes.to_vec();
    if out.is_empty() {
        return out;
    }
    let kinds = params.enabled_kinds();
    debug_assert!(!kinds.is_empty(), "validated params have an edit kind");
    let stack = 1u32 << rng.random_range(0..=params.max_stack_exp);
    for _ in 0..stack {
        let pos = rng.random_range(0..out.len());
        if let Some(t) = trace.as_deref_mut() {
            t.push(pos);
        }
        match kinds[rng.random_range(0..kinds.len())] {
            EditKind::FlipBit => {
                out[pos] ^= 1 << rng.random_range(0..8u32);
            }
            EditKind::OverwriteByte => {
                out[pos] = rng.random();
            }
            EditKind::ArithByte => {
                let delta = rng.random_range(1..=ARITH_MAX_DELTA);
                if rng.random_range(0..2) == 0 {
                    out[pos] = out[pos].wrapping_add(delta);
                } else {
                    out[pos] = out[pos].wrapping_sub(delta);
                }
            }
        }
    }
    out
}

/// Two-parent crossover: a prefix of `a` followed by a suffix of `b`.
/// Cut points are drawn as `i in 0..=a.len()`, then `j in 0..=b.len()`;
/// the result is truncated to `max_len`.
pub fn splice<R: Rng>(a: &[u8], b: &[u8], max_len: usize, rng: &mut R) -> Vec<u8> {
    let i = rng.random_range(0..=a.len());
    let j = rng.random_range(0..=b.len());
    let mut out = Vec::with_capacity(i + (b.len() - j));
    out.extend_from_slice(&a[..i]);
    out.extend_from_slice(&b[j..]);
    out.truncate(max_len);
    out
}

/// Generates the next iteration's inputs.
///
/// Pending initial seeds are emitted first, unmutated and in manifest order.
/// Remaining slots each select a parent (roulette), then havoc it or splice
/// it with a second parent. Slot `s` of iteration `i` draws exclusively from
/// the stream keyed by `(master_seed, i, s)`, so results do not depend on
/// scheduling. If the seed pool is still empty once pending initials run
/// out, the batch is cut short; an entirely empty batch is an error.
pub fn get_inputs(
    corpus: &mut CorpusState,
    count: usize,
    params: &MutationParams,
    master_seed: u64,
    iteration: u64,
) -> Result<Vec<Chromosome>> {
    let mut out = Vec::with_capacity(count);
    for slot in 0..count {
        if let Some(initial) = corpus.pop_pending_initial() {
            out.push(initial);
            continue;
        }
        if corpus.seeds().is_empty() {
            if out.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            break;
        }
        let mut rng = slot_stream(master_seed, iteration, slot as u64);
        let parent = corpus.select(&mut rng)?;
        let parent_id = parent.chromosome.id;
        let (bytes, origin, parents) = if rng.random_bool(params.p_splice) {
            let partner = corpus.select(&mut rng)?;
            let spliced = splice(
                &parent.chromosome.bytes,
                &partner.chromosome.bytes,
                params.max_chromosome_bytes,
                &mut rng,
            );
            (
                spliced,
                ChromosomeOrigin::Splice,
                Some((parent_id, Some(partner.chromosome.id))),
            )
        } else {
            let mutated = havoc(&parent.chromosome.bytes, &params.havoc, &mut rng);
            (mutated, ChromosomeOrigin::Havoc, Some((parent_id, None)))
        };
        let id = corpus.alloc_id();
        out.push(Chromosome {
            id,
            bytes,
            origin,
            parents,
        });
    }
    Ok(out)
}

/// Pure-random chromosome for baseline comparisons against guided
/// campaigns. Draws from the same keyed stream family as [`get_inputs`];
/// the length is picked uniformly from `lengths` (typically the initial
/// corpus lengths, to keep the comparison fair).
pub fn random_chromosome(
    master_seed: u64,
    iteration: u64,
    slot: u64,
    lengths: &[usize],
) -> Vec<u8> {
    assert!(!lengths.is_empty(), "length pool must be non-empty");
    let mut rng = slot_stream(master_seed, iteration, slot);
    let len = lengths[rng.random_range(0..lengths.len())];
    let mut bytes = vec![0u8; len];
    rng.fill(&mut bytes[..]);
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FitnessParams;
    use crate::coverage::CoverageVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn only(kind: EditKind, max_stack_exp: u32) -> HavocParams {
        HavocParams {
            max_stack_exp,
            flip_bit: matches!(kind, EditKind::FlipBit),
            overwrite_byte: matches!(kind, EditKind::OverwriteByte),
            arith_byte: matches!(kind, EditKind::ArithByte),
        }
    }

    #[test]
    fn empty_input_stays_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(havoc(&[], &HavocParams::default(), &mut rng).is_empty());
    }

    #[test]
    fn havoc_preserves_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for len in [1usize, 2, 7, 64, 301] {
            let input = vec![0xAB; len];
            for _ in 0..8 {
                assert_eq!(havoc(&input, &HavocParams::default(), &mut rng).len(), len);
            }
        }
    }

    #[test]
    fn edit_count_stays_within_stack_bounds() {
        let input = vec![0u8; 16];
        let params = HavocParams::default();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut trace = Vec::new();
            havoc_traced(&input, &params, &mut rng, Some(&mut trace));
            assert!(!trace.is_empty());
            assert!(trace.len() <= 64, "{} edits", trace.len());
            assert!(trace.iter().all(|&p| p < input.len()));
        }
    }

    #[test]
    fn single_flip_changes_exactly_one_bit() {
        let input = [0b1010_1010u8, 0xFF, 0x00];
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = havoc(&input, &only(EditKind::FlipBit, 0), &mut rng);
            let flipped: u32 = input
                .iter()
                .zip(&out)
                .map(|(a, b)| (a ^ b).count_ones())
                .sum();
            assert_eq!(flipped, 1);
        }
    }

    #[test]
    fn single_arith_edit_wraps_within_delta_range() {
        let mut saw_wrap_down = false;
        let mut saw_wrap_up = false;
        for (input, seed) in [(0x00u8, 0u64), (0xFFu8, 0u64)]
            .iter()
            .flat_map(|&(b, _)| (0..200u64).map(move |s| (b, s)))
        {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = havoc(&[input], &only(EditKind::ArithByte, 0), &mut rng)[0];
            let up = out.wrapping_sub(input);
            let down = input.wrapping_sub(out);
            let delta = up.min(down);
            assert!(
                (1..=ARITH_MAX_DELTA).contains(&delta),
                "input {input:#x} out {out:#x}"
            );
            if input == 0x00 && out > 0xC0 {
                saw_wrap_down = true;
            }
            if input == 0xFF && out < 0x40 {
                saw_wrap_up = true;
            }
        }
        assert!(saw_wrap_down && saw_wrap_up);
    }

    #[test]
    fn edit_positions_are_uniform() {
        // Chi-square over 8 positions; critical value for df=7 at the 1%
        // level is 18.48.
        let input = vec![0u8; 8];
        let params = HavocParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0u64; 8];
        let mut total = 0u64;
        while total < 40_000 {
            let mut trace = Vec::new();
            havoc_traced(&input, &params, &mut rng, Some(&mut trace));
            for p in trace {
                counts[p] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 18.48, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn disabled_kinds_fail_validation() {
        let params = HavocParams {
            flip_bit: false,
            overwrite_byte: false,
            arith_byte: false,
            ..HavocParams::default()
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn splice_matches_cut_point_semantics() {
        // Re-draw the cut points from a twin rng and build the expected
        // output by hand; the draw order (i, then j) is part of the contract.
        let a = [1u8, 2, 3, 4];
        let b = [9u8, 8, 7, 6];
        for seed in 0..200 {
            let mut twin = ChaCha8Rng::seed_from_u64(seed);
            let i = twin.random_range(0..=a.len());
            let j = twin.random_range(0..=b.len());
            let mut expected = a[..i].to_vec();
            expected.extend_from_slice(&b[j..]);

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(splice(&a, &b, 4096, &mut rng), expected);
            if i == 2 && j == 2 {
                assert_eq!(expected, vec![1, 2, 7, 6]);
            }
        }
    }

    #[test]
    fn splice_reaches_both_extremes() {
        let a = [0x0A; 5];
        let b = [0xB0; 5];
        let mut seen_i = [false; 6];
        for seed in 0..500 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = splice(&a, &b, 4096, &mut rng);
            let i = out.iter().take_while(|&&x| x == 0x0A).count();
            assert!(out[i..].iter().all(|&x| x == 0xB0));
            seen_i[i.min(5)] = true;
        }
        assert!(seen_i[0], "never produced an empty prefix");
        assert!(seen_i[5], "never produced a full prefix");
    }

    #[test]
    fn splice_truncates_to_limit() {
        let a = [1u8; 30];
        let b = [2u8; 30];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(splice(&a, &b, 16, &mut rng).len() <= 16);
        }
    }

    #[test]
    fn empty_parents_splice_to_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(splice(&[], &[], 4096, &mut rng).is_empty());
    }

    fn seeded_corpus(initial: &[&[u8]]) -> CorpusState {
        let chromosomes = initial
            .iter()
            .enumerate()
            .map(|(i, b)| Chromosome::initial(i as u64, b.to_vec()))
            .collect();
        CorpusState::new(4, chromosomes, FitnessParams::default(), 100_000).unwrap()
    }

    fn absorb_initials(corpus: &mut CorpusState) {
        let mut it = 0;
        while let Some(c) = corpus.pop_pending_initial() {
            let cov = CoverageVector::new(vec![1, 0, 0, 0]);
            corpus.update_seed_corpus(it, vec![(c, cov)]).unwrap();
            it += 1;
        }
    }

    #[test]
    fn initial_seeds_pass_through_unmutated() {
        let mut corpus = seeded_corpus(&[&[1, 1], &[2, 2], &[3, 3]]);
        let inputs = get_inputs(&mut corpus, 3, &MutationParams::default(), 7, 0).unwrap();
        assert_eq!(inputs.len(), 3);
        for (i, input) in inputs.iter().enumerate() {
            assert_eq!(input.id, i as u64);
            assert_eq!(input.origin, ChromosomeOrigin::InitialSeed);
            assert_eq!(input.bytes, vec![(i + 1) as u8; 2]);
        }
    }

    #[test]
    fn lone_seed_with_zero_splice_yields_havoc_children() {
        let mut corpus = seeded_corpus(&[&[5u8; 16]]);
        absorb_initials(&mut corpus);
        let params = MutationParams {
            p_splice: 0.0,
            ..MutationParams::default()
        };
        let inputs = get_inputs(&mut corpus, 8, &params, 7, 1).unwrap();
        assert_eq!(inputs.len(), 8);
        for input in &inputs {
            assert_eq!(input.origin, ChromosomeOrigin::Havoc);
            assert_eq!(input.bytes.len(), 16);
            assert_eq!(input.parents, Some((0, None)));
        }
    }

    #[test]
    fn generation_is_deterministic_per_stream() {
        let make = || {
            let mut corpus = seeded_corpus(&[&[1u8; 8], &[2u8; 8]]);
            absorb_initials(&mut corpus);
            get_inputs(&mut corpus, 6, &MutationParams::default(), 99, 5).unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a, b);
    }

    #[test]
    fn exhausted_corpus_is_an_error() {
        let mut corpus = seeded_corpus(&[&[1u8]]);
        corpus.pop_pending_initial().unwrap();
        let err = get_inputs(&mut corpus, 2, &MutationParams::default(), 1, 0).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn mixed_batch_is_cut_short_when_pool_is_empty() {
        let mut corpus = seeded_corpus(&[&[1u8], &[2u8]]);
        let inputs = get_inputs(&mut corpus, 4, &MutationParams::default(), 1, 0).unwrap();
        assert_eq!(inputs.len(), 2);
    }

    #[test]
    fn generated_inputs_respect_length_cap() {
        let mut corpus = seeded_corpus(&[&[1u8; 64], &[2u8; 64]]);
        absorb_initials(&mut corpus);
        let params = MutationParams {
            p_splice: 1.0,
            max_chromosome_bytes: 48,
            ..MutationParams::default()
        };
        for iteration in 1..40 {
            for input in get_inputs(&mut corpus, 4, &params, 11, iteration).unwrap() {
                assert!(input.bytes.len() <= 48);
                assert_eq!(input.origin, ChromosomeOrigin::Splice);
            }
        }
    }

    #[test]
    fn random_baseline_is_deterministic_and_length_bounded() {
        let lengths = [4usize, 9, 16];
        let a = random_chromosome(3, 7, 1, &lengths);
        let b = random_chromosome(3, 7, 1, &lengths);
        assert_eq!(a, b);
        assert!(lengths.contains(&a.len()));
        let c = random_chromosome(3, 8, 1, &lengths);
        assert_ne!(a, c);
        // The stream is not stuck on one value.
        let distinct: std::collections::HashSet<Vec<u8>> = (0..20)
            .map(|i| random_chromosome(3, i, 0, &lengths))
            .collect();
        assert!(distinct.len() > 15);
    }
}
