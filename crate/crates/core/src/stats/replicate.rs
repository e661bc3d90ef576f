//! Independent replications of one experiment configuration.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::occupancy::{
    allocate_fixed, allocate_poissonized, count_profile, BoxFrequencies, CountProfile,
};
use crate::rng::{domain, stream};
use crate::stats::config::{
    Allocation, ExperimentConfig, ResolvedExperiment, ResolvedModel, StatisticSpec,
};
use crate::subordinator::{exp_functional, frequencies, simulate_path, PathSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub index: u64,
    /// One entry per resolved statistic, in configuration order.
    pub counts: Vec<u64>,
    pub i_alpha: Option<f64>,
    pub i_alpha_bias: Option<f64>,
    pub n_boxes: usize,
    pub overflow: u64,
}

#[derive(Debug, Clone)]
pub struct ReplicationTable {
    pub config: ExperimentConfig,
    pub labels: Vec<String>,
    pub rows: Vec<ReplicationRow>,
}

impl ReplicationTable {
    /// Column by CSV header name, as floats.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(j) = self.labels.iter().position(|l| l == name) {
            return Some(self.rows.iter().map(|r| r.counts[j] as f64).collect());
        }
        let get: fn(&ReplicationRow) -> Option<f64> = match name {
            "index" => |r| Some(r.index as f64),
            "i_alpha" => |r| r.i_alpha,
            "i_alpha_bias" => |r| r.i_alpha_bias,
            "n_boxes" => |r| Some(r.n_boxes as f64),
            "overflow" => |r| Some(r.overflow as f64),
            _ => return None,
        };
        self.rows.iter().map(get).collect()
    }

    /// Counts of the `j`-th recorded statistic.
    pub fn counts(&self, j: usize) -> Vec<u64> {
        self.rows.iter().map(|r| r.counts[j]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let echo =
            serde_json::to_string(&self.config.to_json()).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w, "# config={echo}")?;
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_string()];
        header.extend(self.labels.iter().cloned());
        header.extend(["i_alpha", "i_alpha_bias", "n_boxes", "overflow"].map(String::from));
        wtr.write_record(&header)?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        for row in &self.rows {
            let mut rec = vec![row.index.to_string()];
            rec.extend(row.counts.iter().map(u64::to_string));
            rec.push(opt(row.i_alpha));
            rec.push(opt(row.i_alpha_bias));
            rec.push(row.n_boxes.to_string());
            rec.push(row.overflow.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One realization of the environment: the box frequencies plus, for the
/// regenerative model, the path summary.
pub enum Environment<'a> {
    Path {
        freqs: crate::subordinator::FrequencyVector,
        summary: PathSummary,
    },
    PowerLaw(&'a crate::occupancy::PowerLawFrequencies),
}

impl Environment<'_> {
    pub fn n_boxes(&self) -> usize {
        match self {
            Environment::Path { freqs, .. } => freqs.n_boxes(),
            Environment::PowerLaw(f) => f.n_boxes(),
        }
    }

    pub fn summary(&self) -> Option<&PathSummary> {
        match self {
            Environment::Path { summary, .. } => Some(summary),
            Environment::PowerLaw(_) => None,
        }
    }

    pub fn allocate<R: Rng + ?Sized>(
        &self,
        allocation: Allocation,
        budget: Option<f64>,
        rng: &mut R,
    ) -> Result<CountProfile> {
        let counts = match (self, allocation) {
            (Environment::Path { freqs, .. }, Allocation::FixedN(n)) => {
                allocate_fixed(freqs, n, budget, rng)?
            }
            (Environment::Path { freqs, .. }, Allocation::Poissonized(t)) => {
                allocate_poissonized(freqs, t, rng)?
            }
            (Environment::PowerLaw(f), Allocation::FixedN(n)) => {
                allocate_fixed(*f, n, budget, rng)?
            }
            (Environment::PowerLaw(f), Allocation::Poissonized(t)) => {
                allocate_poissonized(*f, t, rng)?
            }
        };
        Ok(count_profile(&counts))
    }
}

/// Draws the environment of replication `index` from its path stream.
pub fn draw_environment(
    resolved: &ResolvedExperiment,
    master_seed: u64,
    index: u64,
) -> Result<Environment<'_>> {
    match &resolved.model {
        ResolvedModel::Regenerative {
            spec,
            epsilon,
            stop_tol,
        } => {
            let mut rng = stream(master_seed, domain::PATH, index);
            let path = simulate_path(spec, *epsilon, *stop_tol, &mut rng)?;
            let summary = exp_functional(&path, spec.alpha())?;
            let freqs = frequencies(&path)?;
            Ok(Environment::Path { freqs, summary })
        }
        ResolvedModel::PowerLaw(f) => Ok(Environment::PowerLaw(f)),
    }
}

fn replicate(
    config: &ExperimentConfig,
    resolved: &ResolvedExperiment,
    index: u64,
) -> Result<ReplicationRow> {
    let env = draw_environment(resolved, config.master_seed, index)?;
    let budget = config.strict.then_some(config.overflow_budget);
    let mut rng = stream(config.master_seed, domain::ALLOCATION, index);
    let profile = env.allocate(config.allocation, budget, &mut rng)?;
    let counts = resolved
        .statistics
        .iter()
        .map(|s| match s.spec {
            StatisticSpec::Exactly(_) => profile.exactly(s.r),
            StatisticSpec::AtLeast(_) => profile.at_least(s.r),
            StatisticSpec::Occupied => profile.total_occupied,
        })
        .collect();
    Ok(ReplicationRow {
        index,
        counts,
        i_alpha: env.summary().map(|s| s.exp_functional),
        i_alpha_bias: env.summary().map(|s| s.total_bias()),
        n_boxes: env.n_boxes(),
        overflow: profile.overflow,
    })
}

/// Runs `config.replications` independent replications. Row `i` depends only
/// on `(master_seed, i, config)`, whatever the thread count.
pub fn run_replications(config: &ExperimentConfig) -> Result<ReplicationTable> {
    let resolved = config.resolve()?;
    let labels = resolved
        .statistics
        .iter()
        .map(|s| s.label.clone())
        .collect();
    let rows = with_pool(config.threads, || {
        (0..config.replications as u64)
            .into_par_iter()
            .map(|i| replicate(config, &resolved, i))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ReplicationTable {
        config: config.clone(),
        labels,
        rows,
    })
}

/// Runs `f` on a pool with `threads` workers (0 = rayon default).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(vec![format!("threads: {e}")]))?;
    pool.install(f)
}
