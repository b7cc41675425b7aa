//! Seed corpus: retention, fitness, selection, and the on-disk format.
//!
//! Fitness of a retained seed is the coverage rate of its own run, floored at
//! `epsilon_fitness`, and multiplied by `favor` while the seed is the only
//! retained seed covering at least one point. Selection is roulette-wheel
//! over those fitness values.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::coverage::{CoverageVector, CumulativeCoverage};
use crate::{Error, Result};

/// How a chromosome came to exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChromosomeOrigin {
    InitialSeed,
    Havoc,
    Splice,
}

/// A flat byte string: the mutable genotype an input is generated from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chromosome {
    pub id: u64,
    pub bytes: Vec<u8>,
    pub origin: ChromosomeOrigin,
    /// Seed ids this chromosome was derived from: none for initial seeds,
    /// one for havoc, two for splice.
    pub parents: Option<(u64, Option<u64>)>,
}

impl Chromosome {
    pub fn initial(id: u64, bytes: Vec<u8>) -> Self {
        Chromosome {
            id,
            bytes,
            origin: ChromosomeOrigin::InitialSeed,
            parents: None,
        }
    }
}

/// A chromosome that earned a place in the corpus, plus the run feedback
/// that justifies it.
#[derive(Clone, Debug)]
pub struct Seed {
    pub chromosome: Chromosome,
    pub run_coverage: CoverageVector,
    /// Coverage rate of this seed's own run, before floor and favor.
    pub base_fitness: f64,
    /// Selection weight: floored rate, times favor while uniquely covering.
    pub effective_fitness: f64,
    /// Iteration at which the seed entered the corpus.
    pub retained_at: u64,
    unique_points: u32,
}

impl Seed {
    pub fn uniquely_covers(&self) -> bool {
        self.unique_points > 0
    }

    pub fn unique_point_count(&self) -> u32 {
        self.unique_points
    }
}

/// Knobs for the fitness function.
#[derive(Clone, Copy, Debug)]
pub struct FitnessParams {
    /// Multiplier applied while a seed uniquely covers some point.
    pub favor: f64,
    /// Floor that keeps every retained seed selectable.
    pub epsilon_fitness: f64,
}

impl Default for FitnessParams {
    fn default() -> Self {
        FitnessParams {
            favor: 4.0,
            epsilon_fitness: 1e-6,
        }
    }
}

impl FitnessParams {
    pub fn validate(&self) -> Result<()> {
        if self.favor.is_nan() || self.favor < 1.0 {
            return Err(Error::Config(format!(
                "favor must be >= 1.0, got {}",
                self.favor
            )));
        }
        if self.epsilon_fitness.is_nan() || self.epsilon_fitness <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon_fitness must be > 0, got {}",
                self.epsilon_fitness
            )));
        }
        Ok(())
    }
}

/// Selection weight for a run with coverage rate `rate`.
pub fn compute_fitness(rate: f64, uniquely_covers: bool, params: &FitnessParams) -> f64 {
    let floored = rate.max(params.epsilon_fitness);
    if uniquely_covers {
        floored * params.favor
    } else {
        floored
    }
}

/// What one corpus update did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateSummary {
    pub retained: usize,
    pub new_points: usize,
    pub stagnation: u64,
}

/// The campaign's seed pool plus cumulative coverage.
#[derive(Debug)]
pub struct CorpusState {
    seeds: Vec<Seed>,
    cumulative: CumulativeCoverage,
    pending_initial: VecDeque<Chromosome>,
    /// For points covered by exactly one retained seed, that seed's index.
    unique_owner: Vec<Option<usize>>,
    params: FitnessParams,
    stagnation: u64,
    next_id: u64,
    max_seeds: usize,
    /// When false, chromosomes with new coverage are still observed but not
    /// retained. Initial seeds are retained regardless; the corpus must
    /// never be empty.
    retain_new_coverage: bool,
}

impl CorpusState {
    pub fn new(
        coverpoints: usize,
        initial: Vec<Chromosome>,
        params: FitnessParams,
        max_seeds: usize,
    ) -> Result<Self> {
        params.validate()?;
        if initial.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if max_seeds == 0 {
            return Err(Error::Config("max corpus seeds must be >= 1".into()));
        }
        let cumulative = CumulativeCoverage::new(coverpoints)?;
        let unique_owner = vec![None; coverpoints];
        let next_id = initial.iter().map(|c| c.id + 1).max().unwrap_or(0);
        Ok(CorpusState {
            seeds: Vec::new(),
            cumulative,
            pending_initial: initial.into(),
            unique_owner,
            params,
            stagnation: 0,
            next_id,
            max_seeds,
            retain_new_coverage: true,
        })
    }

    pub fn seeds(&self) -> &[Seed] {
        &self.seeds
    }

    pub fn cumulative(&self) -> &CumulativeCoverage {
        &self.cumulative
    }

    pub fn params(&self) -> &FitnessParams {
        &self.params
    }

    pub fn stagnation(&self) -> u64 {
        self.stagnation
    }

    pub fn has_pending_initial(&self) -> bool {
        !self.pending_initial.is_empty()
    }

    pub(crate) fn pop_pending_initial(&mut self) -> Option<Chromosome> {
        self.pending_initial.pop_front()
    }

    pub(crate) fn alloc_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub(crate) fn set_retain_new_coverage(&mut self, on: bool) {
        self.retain_new_coverage = on;
    }

    /// Roulette-wheel draw proportional to effective fitness.
    pub fn select<'a, R: Rng>(&'a self, rng: &mut R) -> Result<&'a Seed> {
        if self.seeds.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let total: f64 = self.seeds.iter().map(|s| s.effective_fitness).sum();
        let mut ticket = rng.random_range(0.0..total);
        for seed in &self.seeds {
            if ticket < seed.effective_fitness {
                return Ok(seed);
            }
            ticket -= seed.effective_fitness;
        }
        Ok(self.seeds.last().expect("corpus checked non-empty"))
    }

    /// Folds one iteration's executed runs back into the corpus, in slot
    /// order: cumulative coverage always absorbs every run; a chromosome is
    /// retained if it is an initial seed or if its run hit a point the
    /// campaign had never hit before.
    pub fn update_seed_corpus(
        &mut self,
        iteration: u64,
        runs: Vec<(Chromosome, CoverageVector)>,
    ) -> Result<UpdateSummary> {
        let mut summary = UpdateSummary::default();
        for (chromosome, coverage) in runs {
            let report = self.cumulative.observe(&coverage)?;
            summary.new_points += report.len();
            let retain = chromosome.origin == ChromosomeOrigin::InitialSeed
                || (self.retain_new_coverage && !report.is_empty());
            if retain {
                self.retain(iteration, chromosome, coverage)?;
                summary.retained += 1;
            }
        }
        if summary.new_points > 0 {
            self.stagnation = 0;
        } else {
            self.stagnation += 1;
        }
        summary.stagnation = self.stagnation;
        Ok(summary)
    }

    fn retain(
        &mut self,
        iteration: u64,
        chromosome: Chromosome,
        coverage: CoverageVector,
    ) -> Result<()> {
        if self.seeds.len() >= self.max_seeds {
            return Err(Error::CorpusFull {
                limit: self.max_seeds,
            });
        }
        let index = self.seeds.len();
        let base_fitness = coverage.covered_fraction();
        let mut unique_points = 0u32;
        // One retention can strip the last unique point from several owners
        // at once; each of them loses its favor.
        let mut demoted: Vec<usize> = Vec::new();
        for point in coverage.covered_points() {
            match self.cumulative.note_covering_seed(point) {
                1 => {
                    self.unique_owner[point] = Some(index);
                    unique_points += 1;
                }
                2 => {
                    let owner = self.unique_owner[point]
                        .take()
                        .expect("count 2 implies a recorded owner");
                    self.seeds[owner].unique_points -= 1;
                    if self.seeds[owner].unique_points == 0 {
                        demoted.push(owner);
                    }
                }
                _ => {}
            }
        }
        for owner in demoted {
            let seed = &mut self.seeds[owner];
            seed.effective_fitness = compute_fitness(seed.base_fitness, false, &self.params);
        }
        let effective_fitness = compute_fitness(base_fitness, unique_points > 0, &self.params);
        self.seeds.push(Seed {
            chromosome,
            run_coverage: coverage,
            base_fitness,
            effective_fitness,
            retained_at: iteration,
            unique_points,
        });
        Ok(())
    }

    /// Writes `seed-<id>.bin` files plus `manifest.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<usize> {
        save_chromosomes(dir, self.seeds.iter().map(|s| &s.chromosome))
    }
}

/// Writes chromosomes to `dir` in the corpus directory format.
pub fn save_chromosomes<'a, I>(dir: &Path, chromosomes: I) -> Result<usize>
where
    I: Iterator<Item = &'a Chromosome>,
{
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let mut count = 0usize;
    for c in chromosomes {
        let name = format!("seed-{}.bin", c.id);
        fs::write(dir.join(name), &c.bytes)?;
        manifest.push_str(&format!("{}\t{}\n", c.id, c.bytes.len()));
        count += 1;
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(count)
}

/// Result of reading a corpus directory.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub chromosomes: Vec<Chromosome>,
    /// Files skipped because they exceed the chromosome size limit.
    pub skipped_oversize: usize,
    pub warnings: Vec<String>,
}

/// Reads a corpus directory: `manifest.txt` order when present, otherwise
/// `seed-<id>.bin` files sorted by id. Oversized files are skipped with a
/// warning; an empty result is an error.
pub fn load_corpus(dir: &Path, max_chromosome_bytes: usize) -> Result<LoadedCorpus> {
    if !dir.is_dir() {
        return Err(Error::NoSeeds {
            dir: dir.to_path_buf(),
        });
    }
    let manifest_path = dir.join("manifest.txt");
    let entries: Vec<(u64, PathBuf, Option<usize>)> = if manifest_path.is_file() {
        parse_manifest(&manifest_path)?
            .into_iter()
            .map(|(id, len)| (id, dir.join(format!("seed-{id}.bin")), Some(len)))
            .collect()
    } else {
        let mut found = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let name = match path.file_name().and_then(|n| n.to_str()) {
                Some(n) => n,
                None => continue,
            };
            if let Some(id) = name
                .strip_prefix("seed-")
                .and_then(|rest| rest.strip_suffix(".bin"))
                .and_then(|digits| digits.parse::<u64>().ok())
            {
                found.push((id, path, None));
            }
        }
        found.sort_by_key(|(id, _, _)| *id);
        found
    };

    let mut seen = std::collections::HashSet::new();
    let mut loaded = LoadedCorpus {
        chromosomes: Vec::new(),
        skipped_oversize: 0,
        warnings: Vec::new(),
    };
    for (id, path, declared_len) in entries {
        if !seen.insert(id) {
            return Err(Error::CorpusFile {
                file: path,
                reason: format!("duplicate seed id {id}"),
            });
        }
        let bytes = fs::read(&path).map_err(|e| Error::CorpusFile {
            file: path.clone(),
            reason: e.to_string(),
        })?;
        if let Some(len) = declared_len {
            if bytes.len() != len {
                return Err(Error::CorpusFile {
                    file: path,
                    reason: format!("manifest declares {len} bytes, file has {}", bytes.len()),
                });
            }
        }
        if bytes.len() > max_chromosome_bytes {
            loaded.skipped_oversize += 1;
            loaded.warnings.push(format!(
                "skipped {}: {} bytes exceeds the {}-byte chromosome limit",
                path.display(),
                bytes.len(),
                max_chromosome_bytes
            ));
            continue;
        }
        loaded.chromosomes.push(Chromosome::initial(id, bytes));
    }
    if loaded.chromosomes.is_empty() {
        return Err(Error::NoSeeds {
            dir: dir.to_path_buf(),
        });
    }
    Ok(loaded)
}

fn parse_manifest(path: &Path) -> Result<Vec<(u64, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::CorpusFile {
        file: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let parsed = match (fields.next(), fields.next(), fields.next()) {
            (Some(id), Some(len), None) => id.parse::<u64>().ok().zip(len.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some(row) => rows.push(row),
            None => {
                return Err(Error::CorpusFile {
                    file: path.to_path_buf(),
                    reason: format!("line {}: expected '<id>\\t<byte-length>'", lineno + 1),
                })
            }
        }
    }
    Ok(rows)
}
