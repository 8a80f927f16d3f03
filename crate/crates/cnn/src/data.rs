//! Dataset generation and the on-disk CSV format.
//!
//! Each sample pairs a K x 2 feature matrix (real and imaginary parts of
//! the SIC-rank-ordered effective channels) with the max-min optimal power
//! vector for that channel. Channels come either from the physical model
//! under a sampled user layout, or from a synthetic zero-mean Gaussian
//! draw; labels always come from the bisection solver, so every target is
//! feasible and exhausts the budget.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use panoma_core::{
    channel_state, maxmin_power, refine_placement, AntennaPlacement, ChannelState,
    MaxMinSolver, PlacementParams, SystemConfig, UserLayout,
};

use crate::error::{CnnError, Result};

/// Cap on re-draws when a sampled scenario fails (degenerate geometry or
/// solver failure).
const RESAMPLE_CAP: usize = 100;

/// Raw (unstandardized) K x 2 features: per SIC rank, column 0 is the real
/// part and column 1 the imaginary part of the effective channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<[f64; 2]>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<[f64; 2]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(CnnError::Shape("feature matrix needs at least one row".into()));
        }
        if rows.iter().any(|r| !r[0].is_finite() || !r[1].is_finite()) {
            return Err(CnnError::Shape("feature entries must be finite".into()));
        }
        Ok(FeatureMatrix { rows })
    }

    /// Features of a channel state, rows ordered by SIC rank.
    pub fn from_state(state: &ChannelState) -> Result<Self> {
        Self::new(
            (0..state.users())
                .map(|r| {
                    let g = state.gain_by_rank(r);
                    [g.re, g.im]
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn users(&self) -> usize {
        self.rows.len()
    }
}

/// Per-column standardization statistics, computed on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl NormStats {
    /// No-op standardization.
    pub fn identity() -> Self {
        NormStats { mean: [0.0, 0.0], std: [1.0, 1.0] }
    }

    /// Column means and standard deviations over all rows of all samples.
    /// Degenerate columns fall back to unit scale.
    pub fn from_samples(samples: &[Sample]) -> Self {
        let mut n = 0usize;
        let mut mean = [0.0f64; 2];
        for s in samples {
            for row in s.features.rows() {
                mean[0] += row[0];
                mean[1] += row[1];
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity();
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        let mut var = [0.0f64; 2];
        for s in samples {
            for row in s.features.rows() {
                var[0] += (row[0] - mean[0]) * (row[0] - mean[0]);
                var[1] += (row[1] - mean[1]) * (row[1] - mean[1]);
            }
        }
        let std = [
            (var[0] / n as f64).sqrt().max(1e-300),
            (var[1] / n as f64).sqrt().max(1e-300),
        ];
        let std = [
            if std[0] > 1e-300 && std[0].is_finite() { std[0] } else { 1.0 },
            if std[1] > 1e-300 && std[1].is_finite() { std[1] } else { 1.0 },
        ];
        NormStats { mean, std }
    }
}

/// One training example: features plus the max-min label in watts with its
/// scenario metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureMatrix,
    /// Max-min optimal powers by SIC rank (W); sums to `p_w`.
    pub target_w: Vec<f64>,
    pub p_w: f64,
    pub sigma2_w: f64,
    pub m_antennas: usize,
    pub k_users: usize,
}

impl Sample {
    /// Label as power fractions `q / P` (the training target space).
    pub fn target_fractions(&self) -> Vec<f64> {
        self.target_w.iter().map(|q| q / self.p_w).collect()
    }
}

/// A split of generated samples plus the standardization statistics of the
/// training split they belong with.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub norm_stats: NormStats,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The common user count, or an error when samples disagree.
    pub fn users(&self) -> Result<usize> {
        let k = self
            .samples
            .first()
            .map(|s| s.k_users)
            .ok_or_else(|| CnnError::Shape("dataset is empty".into()))?;
        if self.samples.iter().any(|s| s.k_users != k) {
            return Err(CnnError::Shape("dataset mixes user counts".into()));
        }
        Ok(k)
    }
}

/// Antenna placement used while generating physical-channel samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    /// Two-stage optimized placement per sampled layout.
    Optimized,
    /// Layout-independent uniform spacing over the feasible interval.
    Uniform,
}

/// Where the per-sample channels come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelSource {
    Physical(PlacementMode),
    /// Re/Im parts drawn i.i.d. from a zero-mean Gaussian with the given
    /// standard deviation; labels still come from the max-min solver.
    GaussianSynthetic { std: f64 },
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub source: ChannelSource,
    pub seed: u64,
}

fn uniform_placement(config: &SystemConfig, params: &PlacementParams) -> Result<AntennaPlacement> {
    let m = config.antennas;
    let (a_min, a_max) = params.bounds_m;
    let xs: Vec<f64> = if m == 1 {
        vec![(a_min + a_max) / 2.0]
    } else {
        (0..m)
            .map(|i| a_min + i as f64 * (a_max - a_min) / (m as f64 - 1.0))
            .collect()
    };
    Ok(AntennaPlacement::new(xs, config.waveguide_height_m)?)
}

fn sample_once(
    config: &SystemConfig,
    params: &PlacementParams,
    zeta: f64,
    source: ChannelSource,
    rng: &mut ChaCha12Rng,
) -> Result<Sample> {
    let state = match source {
        ChannelSource::Physical(mode) => {
            let pts: Vec<(f64, f64)> = (0..config.users)
                .map(|_| {
                    (
                        rng.gen_range(-config.region_d1_m / 2.0..=config.region_d1_m / 2.0),
                        rng.gen_range(-config.region_d2_m / 2.0..=config.region_d2_m / 2.0),
                    )
                })
                .collect();
            let layout = UserLayout::on_ground(&pts)?;
            let placement = match mode {
                PlacementMode::Optimized => {
                    refine_placement(&layout, config, params, &MaxMinSolver { zeta })?.placement
                }
                PlacementMode::Uniform => uniform_placement(config, params)?,
            };
            channel_state(&layout, &placement, config)?
        }
        ChannelSource::GaussianSynthetic { std } => {
            let normal = Normal::new(0.0, std)
                .map_err(|e| CnnError::Generation(format!("bad gaussian std: {e}")))?;
            let gains: Vec<Complex64> = (0..config.users)
                .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
                .collect();
            ChannelState::from_gains(gains)?
        }
    };
    let solved = maxmin_power(&state, config.total_power_w, config.noise_power_w, zeta)?;
    Ok(Sample {
        features: FeatureMatrix::from_state(&state)?,
        target_w: solved.q_opt.q().to_vec(),
        p_w: config.total_power_w,
        sigma2_w: config.noise_power_w,
        m_antennas: config.antennas,
        k_users: config.users,
    })
}

/// Generate train and test splits. Failed draws are resampled up to a cap;
/// standardization statistics are computed on the training split only and
/// copied onto the test split.
pub fn generate_dataset(
    config: &SystemConfig,
    params: &PlacementParams,
    zeta: f64,
    spec: &DatasetSpec,
) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let draw = |n: usize, rng: &mut ChaCha12Rng| -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let mut attempts = 0;
            let sample = loop {
                match sample_once(config, params, zeta, spec.source, rng) {
                    Ok(s) => break s,
                    Err(e) => {
                        attempts += 1;
                        if attempts >= RESAMPLE_CAP {
                            return Err(CnnError::Generation(format!(
                                "gave up after {RESAMPLE_CAP} resamples: {e}"
                            )));
                        }
                    }
                }
            };
            out.push(sample);
        }
        Ok(out)
    };
    let train_samples = draw(spec.n_train, &mut rng)?;
    let test_samples = draw(spec.n_test, &mut rng)?;
    let stats = NormStats::from_samples(&train_samples);
    Ok((
        Dataset { samples: train_samples, norm_stats: stats.clone() },
        Dataset { samples: test_samples, norm_stats: stats },
    ))
}

pub const DATASET_CSV_HEADER: &str = "sample_id,k,re_g,im_g,q_target,P_w,sigma2_w,M,K";

/// Serialize a dataset: one row per user per sample, `k` being the 1-based
/// SIC rank.
pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(DATASET_CSV_HEADER);
    out.push('\n');
    for (id, s) in dataset.samples.iter().enumerate() {
        for (r, row) in s.features.rows().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                id,
                r + 1,
                row[0],
                row[1],
                s.target_w[r],
                s.p_w,
                s.sigma2_w,
                s.m_antennas,
                s.k_users
            );
        }
    }
    out
}

/// Parse a dataset written by [`dataset_to_csv`]. Standardization stats
/// are recomputed from the parsed samples.
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == DATASET_CSV_HEADER => {}
        other => {
            return Err(CnnError::MalformedData {
                line: 1,
                reason: format!("expected header '{DATASET_CSV_HEADER}', got {other:?}"),
            })
        }
    }
    let mut samples: Vec<Sample> = Vec::new();
    let mut current: Option<(usize, Vec<[f64; 2]>, Vec<f64>, f64, f64, usize, usize)> = None;
    let flush = |cur: &mut Option<(usize, Vec<[f64; 2]>, Vec<f64>, f64, f64, usize, usize)>,
                     samples: &mut Vec<Sample>|
     -> Result<()> {
        if let Some((_, rows, target, p, sigma2, m, k)) = cur.take() {
            if rows.len() != k {
                return Err(CnnError::MalformedData {
                    line: 0,
                    reason: format!("sample has {} rows, K = {k}", rows.len()),
                });
            }
            samples.push(Sample {
                features: FeatureMatrix::new(rows)?,
                target_w: target,
                p_w: p,
                sigma2_w: sigma2,
                m_antennas: m,
                k_users: k,
            });
        }
        Ok(())
    };
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(CnnError::MalformedData {
                line: lineno + 1,
                reason: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| CnnError::MalformedData {
                line: lineno + 1,
                reason: format!("bad {what}: {s:?}"),
            })
        };
        let parse_u = |s: &str, what: &str| -> Result<usize> {
            s.trim().parse::<usize>().map_err(|_| CnnError::MalformedData {
                line: lineno + 1,
                reason: format!("bad {what}: {s:?}"),
            })
        };
        let id = parse_u(fields[0], "sample_id")?;
        let _rank = parse_u(fields[1], "k")?;
        let re = parse_f(fields[2], "re_g")?;
        let im = parse_f(fields[3], "im_g")?;
        let q = parse_f(fields[4], "q_target")?;
        let p = parse_f(fields[5], "P_w")?;
        let sigma2 = parse_f(fields[6], "sigma2_w")?;
        let m = parse_u(fields[7], "M")?;
        let k = parse_u(fields[8], "K")?;
        match &mut current {
            Some((cid, rows, target, ..)) if *cid == id => {
                rows.push([re, im]);
                target.push(q);
            }
            _ => {
                flush(&mut current, &mut samples)?;
                current = Some((id, vec![[re, im]], vec![q], p, sigma2, m, k));
            }
        }
    }
    flush(&mut current, &mut samples)?;
    let stats = NormStats::from_samples(&samples);
    Ok(Dataset { samples, norm_stats: stats })
}

pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(dataset))?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    dataset_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> (SystemConfig, PlacementParams) {
        let config = SystemConfig {
            antennas: 2,
            users: 2,
            total_power_w: 0.01,
            ..SystemConfig::default()
        }
        .validated()
        .unwrap();
        let params = PlacementParams {
            max_iters: 20,
            tol_bpshz: 1e-3,
            ..PlacementParams::for_config(&config)
        };
        (config, params)
    }

    #[test]
    fn empty_train_split_is_allowed() {
        let (config, params) = tiny_config();
        let spec = DatasetSpec {
            n_train: 0,
            n_test: 2,
            source: ChannelSource::Physical(PlacementMode::Uniform),
            seed: 3,
        };
        let (train, test) = generate_dataset(&config, &params, 1e-6, &spec).unwrap();
        assert!(train.is_empty());
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn labels_are_feasible_and_exhaust_budget() {
        let (config, params) = tiny_config();
        let spec = DatasetSpec {
            n_train: 5,
            n_test: 0,
            source: ChannelSource::Physical(PlacementMode::Uniform),
            seed: 11,
        };
        let (train, _) = generate_dataset(&config, &params, 1e-6, &spec).unwrap();
        for s in &train.samples {
            assert!(s.target_w.iter().all(|&q| q >= 0.0));
            let total: f64 = s.target_w.iter().sum();
            assert!((total - s.p_w).abs() <= 1e-9 * s.p_w);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (config, params) = tiny_config();
        let spec = DatasetSpec {
            n_train: 3,
            n_test: 2,
            source: ChannelSource::Physical(PlacementMode::Optimized),
            seed: 21,
        };
        let a = generate_dataset(&config, &params, 1e-6, &spec).unwrap();
        let b = generate_dataset(&config, &params, 1e-6, &spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn gaussian_source_labels_via_solver() {
        let (config, params) = tiny_config();
        let spec = DatasetSpec {
            n_train: 4,
            n_test: 0,
            source: ChannelSource::GaussianSynthetic { std: 1.0 },
            seed: 5,
        };
        let (train, _) = generate_dataset(&config, &params, 1e-6, &spec).unwrap();
        for s in &train.samples {
            let total: f64 = s.target_w.iter().sum();
            assert!((total - s.p_w).abs() <= 1e-9 * s.p_w);
        }
    }

    #[test]
    fn csv_roundtrip_is_lossless() {
        let (config, params) = tiny_config();
        let spec = DatasetSpec {
            n_train: 3,
            n_test: 0,
            source: ChannelSource::Physical(PlacementMode::Uniform),
            seed: 8,
        };
        let (train, _) = generate_dataset(&config, &params, 1e-6, &spec).unwrap();
        let text = dataset_to_csv(&train);
        let back = dataset_from_csv(&text).unwrap();
        assert_eq!(train, back);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = format!("{DATASET_CSV_HEADER}\n0,1,bad,0.0,0.0,1.0,1.0,2,2\n");
        match dataset_from_csv(&text) {
            Err(CnnError::MalformedData { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-data error, got {other:?}"),
        }
    }
}
