//! Supervised-learning records built from state trajectories.
//!
//! Each record holds four channels of length `N`:
//! `(Re ψ(t), Im ψ(t), Re ψ(0), Im ψ(0))`, stored channel-major in `f32`, and a
//! scalar target (`C(t)/N` or `t/N`). Records are kept in a struct-of-arrays
//! layout ordered by sample id, then β index, then time index.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::ensemble::GueEnsemble;
use crate::error::{invalid, Error, Result};
use crate::krylov::ComplexityCurve;
use crate::numerics::Rng;
use crate::states::{Basis, SampleEvolution, StateTrajectory};

/// Input channels per record.
pub const CHANNELS: usize = 4;

/// What a record's target measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TargetKind {
    ComplexityOverN,
    TimeOverN,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::ComplexityOverN => "complexity_over_n",
            TargetKind::TimeOverN => "time_over_n",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "complexity_over_n" | "complexity" | "c" => Ok(TargetKind::ComplexityOverN),
            "time_over_n" | "time" | "t" => Ok(TargetKind::TimeOverN),
            _ => Err(invalid!("unknown target '{s}' (expected complexity_over_n or time_over_n)")),
        }
    }
}

/// Which part of a split a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(SplitKind::Train),
            "val" | "validation" => Ok(SplitKind::Val),
            "test" => Ok(SplitKind::Test),
            _ => Err(invalid!("unknown split '{s}' (expected train, val or test)")),
        }
    }
}

/// Sample ids per split, in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Split {
    pub seed: u64,
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl Split {
    pub fn samples(&self, kind: SplitKind) -> &[u32] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    pub fn kind_of(&self, sample: u32) -> Option<SplitKind> {
        [SplitKind::Train, SplitKind::Val, SplitKind::Test]
            .into_iter()
            .find(|k| self.samples(*k).contains(&sample))
    }
}

/// Dataset-wide metadata.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    /// Hilbert-space dimension; every channel has this length.
    pub n: usize,
    /// Number of distinct samples.
    pub m: usize,
    /// Time-grid length.
    pub t: usize,
    pub betas: Vec<f64>,
    pub basis: Basis,
    pub target_kind: TargetKind,
    /// Seed of the ensemble the records came from.
    pub seed: u64,
}

/// Borrowed view of one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record<'a> {
    pub features: &'a [f32],
    pub target: f32,
    pub sample_id: u32,
    pub beta_index: u32,
    pub time_index: u32,
}

impl Record<'_> {
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.features.len() / CHANNELS;
        &self.features[c * n..(c + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub split: Option<Split>,
    features: Vec<f32>,
    targets: Vec<f32>,
    sample_ids: Vec<u32>,
    beta_indices: Vec<u32>,
    time_indices: Vec<u32>,
}

impl Dataset {
    /// Empty dataset with the given metadata.
    pub fn empty(meta: DatasetMeta) -> Self {
        Self {
            meta,
            split: None,
            features: Vec::new(),
            targets: Vec::new(),
            sample_ids: Vec::new(),
            beta_indices: Vec::new(),
            time_indices: Vec::new(),
        }
    }

    /// Reassembles a dataset from its arrays (e.g. after reading it from
    /// disk), validating shapes and ordering.
    pub fn from_parts(
        meta: DatasetMeta,
        split: Option<Split>,
        features: Vec<f32>,
        targets: Vec<f32>,
        sample_ids: Vec<u32>,
        beta_indices: Vec<u32>,
        time_indices: Vec<u32>,
    ) -> Result<Self> {
        let r = targets.len();
        if features.len() != r * CHANNELS * meta.n
            || sample_ids.len() != r
            || beta_indices.len() != r
            || time_indices.len() != r
        {
            return Err(invalid!("dataset arrays disagree on the record count"));
        }
        let ds = Self { meta, split, features, targets, sample_ids, beta_indices, time_indices };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.len() {
            if self.time_indices[i] as usize >= self.meta.t.max(1)
                || self.beta_indices[i] as usize >= self.meta.betas.len().max(1)
            {
                return Err(invalid!("record {i} has an out-of-range time or beta index"));
            }
            if i > 0 {
                let prev = (self.sample_ids[i - 1], self.beta_indices[i - 1], self.time_indices[i - 1]);
                let cur = (self.sample_ids[i], self.beta_indices[i], self.time_indices[i]);
                if cur <= prev {
                    return Err(invalid!("records are not ordered by (sample, beta, time) at {i}"));
                }
            }
        }
        if let Some(split) = &self.split {
            check_split(split)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Floats per record.
    pub fn record_width(&self) -> usize {
        CHANNELS * self.meta.n
    }

    pub fn record(&self, i: usize) -> Record<'_> {
        let w = self.record_width();
        Record {
            features: &self.features[i * w..(i + 1) * w],
            target: self.targets[i],
            sample_id: self.sample_ids[i],
            beta_index: self.beta_indices[i],
            time_index: self.time_indices[i],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = Record<'_>> {
        (0..self.len()).map(|i| self.record(i))
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn targets(&self) -> &[f32] {
        &self.targets
    }

    pub fn sample_ids(&self) -> &[u32] {
        &self.sample_ids
    }

    pub fn beta_indices(&self) -> &[u32] {
        &self.beta_indices
    }

    pub fn time_indices(&self) -> &[u32] {
        &self.time_indices
    }

    /// Indices of the records whose sample belongs to `kind`, in record
    /// order. Errors if the dataset has not been split.
    pub fn split_records(&self, kind: SplitKind) -> Result<Vec<usize>> {
        let split = self.split.as_ref().ok_or_else(|| invalid!("dataset has no split"))?;
        let mut member = vec![false; self.meta.m.max(1)];
        for &s in split.samples(kind) {
            if let Some(slot) = member.get_mut(s as usize) {
                *slot = true;
            }
        }
        Ok((0..self.len())
            .filter(|&i| member.get(self.sample_ids[i] as usize).copied().unwrap_or(false))
            .collect())
    }

    /// Keeps only records for which `keep` returns true (metadata unchanged).
    pub fn filter(&self, mut keep: impl FnMut(Record<'_>) -> bool) -> Self {
        let mut out = Self { split: self.split.clone(), ..Self::empty(self.meta.clone()) };
        for r in self.records() {
            if keep(r) {
                out.push(r.features, r.target, r.sample_id, r.beta_index, r.time_index);
            }
        }
        out
    }

    fn push(&mut self, features: &[f32], target: f32, sample: u32, beta: u32, time: u32) {
        self.features.extend_from_slice(features);
        self.targets.push(target);
        self.sample_ids.push(sample);
        self.beta_indices.push(beta);
        self.time_indices.push(time);
    }
}

/// One record per `(sample, β, t)`.
///
/// `trajectories[i]` and `curves[i]` must describe the same `(sample, β)`
/// pair on the same time grid. `n` is the Hilbert-space dimension; Krylov
/// trajectories with `K < n` are zero-padded.
pub fn build_dataset(
    trajectories: &[StateTrajectory],
    curves: &[ComplexityCurve],
    target_kind: TargetKind,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if trajectories.len() != curves.len() {
        return Err(invalid!(
            "{} trajectories but {} complexity curves",
            trajectories.len(),
            curves.len()
        ));
    }
    let first = trajectories.first().ok_or_else(|| invalid!("no trajectories"))?;
    let basis = first.basis;
    let grid = &first.times;

    let mut betas: Vec<f64> = Vec::new();
    let mut samples: Vec<usize> = Vec::new();
    for (traj, curve) in trajectories.iter().zip(curves) {
        if traj.basis != basis {
            return Err(invalid!("trajectories mix bases {basis} and {}", traj.basis));
        }
        if &traj.times != grid || &curve.times != grid {
            return Err(invalid!("time grid mismatch for sample {}", traj.sample_id));
        }
        if traj.dim() > n {
            return Err(invalid!("trajectory dimension {} exceeds N = {n}", traj.dim()));
        }
        if !betas.iter().any(|b| b.to_bits() == traj.beta.to_bits()) {
            betas.push(traj.beta);
        }
        if !samples.contains(&traj.sample_id) {
            samples.push(traj.sample_id);
        }
    }
    samples.sort_unstable();
    if samples.iter().enumerate().any(|(i, &s)| i != s) {
        return Err(invalid!("sample ids must be 0..M without gaps"));
    }
    let beta_index =
        |b: f64| betas.iter().position(|x| x.to_bits() == b.to_bits()).unwrap_or(0) as u32;

    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.sort_by_key(|&i| (trajectories[i].sample_id, beta_index(trajectories[i].beta)));
    for w in order.windows(2) {
        let (a, b) = (&trajectories[w[0]], &trajectories[w[1]]);
        if a.sample_id == b.sample_id && a.beta.to_bits() == b.beta.to_bits() {
            return Err(invalid!("duplicate trajectory for sample {} beta {}", a.sample_id, a.beta));
        }
    }

    let meta = DatasetMeta {
        n,
        m: samples.len(),
        t: grid.len(),
        betas: betas.clone(),
        basis,
        target_kind,
        seed,
    };
    let mut ds = Dataset::empty(meta);
    let width = CHANNELS * n;
    ds.features.reserve(trajectories.len() * grid.len() * width);
    let mut buf = vec![0.0f32; width];
    let norm = n as f64;
    for &i in &order {
        let (traj, curve) = (&trajectories[i], &curves[i]);
        let psi0 = traj.psi0();
        buf.iter_mut().for_each(|x| *x = 0.0);
        for (k, z) in psi0.iter().enumerate() {
            buf[2 * n + k] = z.re as f32;
            buf[3 * n + k] = z.im as f32;
        }
        for (t, col) in traj.psi_t.columns().enumerate() {
            for (k, z) in col.iter().enumerate() {
                buf[k] = z.re as f32;
                buf[n + k] = z.im as f32;
            }
            let target = match target_kind {
                TargetKind::ComplexityOverN => curve.values[t] / norm,
                TargetKind::TimeOverN => grid[t] / norm,
            };
            ds.push(&buf, target as f32, traj.sample_id as u32, beta_index(traj.beta), t as u32);
        }
    }
    Ok(ds)
}

/// Evolves every `(sample, β)` pair of the ensemble, expresses the states in
/// `basis` and builds the dataset. Also returns the complexity curves, ordered
/// by sample then β.
///
/// The pseudo-random basis uses sample 0's diagonalising unitary for every
/// sample.
pub fn simulate(
    ensemble: &GueEnsemble,
    betas: &[f64],
    basis: Basis,
    target_kind: TargetKind,
    times: &[f64],
) -> Result<(Dataset, Vec<ComplexityCurve>)> {
    if ensemble.is_empty() {
        return Err(invalid!("empty ensemble"));
    }
    if betas.is_empty() {
        return Err(invalid!("no inverse temperatures given"));
    }
    let reference = ensemble.samples[0].eig().diagonalizer();
    let pairs: Vec<(usize, f64)> =
        (0..ensemble.len()).flat_map(|s| betas.iter().map(move |&b| (s, b))).collect();
    let run = |&(s, beta): &(usize, f64)| -> Result<(StateTrajectory, ComplexityCurve)> {
        let h = &ensemble.samples[s];
        let ev = SampleEvolution::compute(h, beta, s, times)?;
        let traj = ev.in_basis(basis, h, Some(&reference))?;
        Ok((traj, ev.curve))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        pairs.par_iter().map(run).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = pairs.iter().map(run).collect::<Result<Vec<_>>>()?;
    let (trajs, curves): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let ds = build_dataset(&trajs, &curves, target_kind, ensemble.n, ensemble.seed)?;
    Ok((ds, curves))
}

fn check_split(split: &Split) -> Result<()> {
    let mut all: Vec<u32> =
        split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid!("a sample appears in more than one split"));
    }
    Ok(())
}

/// Assigns whole samples to train/val/test.
///
/// Sample ids are shuffled with `rng`, then cut contiguously: `floor(M·r_val)`
/// validation samples, `floor(M·r_test)` test samples, and everything else
/// (including rounding remainders) to training.
pub fn split_by_sample(dataset: &Dataset, ratios: [f64; 3], rng: &mut Rng) -> Result<Dataset> {
    let [r_train, r_val, r_test] = ratios;
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0))
        || ((r_train + r_val + r_test) - 1.0).abs() > 1e-9
    {
        return Err(invalid!("split ratios {ratios:?} must be non-negative and sum to 1"));
    }
    let m = dataset.meta.m;
    let n_val = (m as f64 * r_val + 1e-9) as usize;
    let n_test = (m as f64 * r_test + 1e-9) as usize;
    if n_val == 0 || n_test == 0 || n_val + n_test >= m {
        return Err(invalid!(
            "ratios {ratios:?} leave an empty split for {m} samples ({n_val} val, {n_test} test)"
        ));
    }
    let mut ids: Vec<u32> = (0..m as u32).collect();
    rng.shuffle(&mut ids);
    let n_train = m - n_val - n_test;
    let split = Split {
        seed: rng.seed(),
        train: ids[..n_train].to_vec(),
        val: ids[n_train..n_train + n_val].to_vec(),
        test: ids[n_train + n_val..].to_vec(),
    };
    let mut out = dataset.clone();
    out.split = Some(split);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::time_grid;

    fn desk(m: usize, betas: &[f64], basis: Basis, target: TargetKind) -> Dataset {
        let e = GueEnsemble::generate(8, m, 3).unwrap();
        simulate(&e, betas, basis, target, &time_grid(8)).unwrap().0
    }

    #[test]
    fn record_count_and_order() {
        let ds = desk(5, &[0.0, 1.0], Basis::Energy, TargetKind::ComplexityOverN);
        assert_eq!(ds.len(), 5 * 2 * 24);
        assert_eq!(ds.meta.m, 5);
        assert_eq!(ds.meta.t, 24);
        let r = ds.record(24);
        assert_eq!((r.sample_id, r.beta_index, r.time_index), (0, 1, 0));
        for r in ds.records() {
            let s = |c: usize| r.channel(c).iter().map(|x| (*x as f64).powi(2)).sum::<f64>();
            assert!((s(0) + s(1) - 1.0).abs() < 1e-6);
            assert!((s(2) + s(3) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn targets_start_at_zero() {
        for kind in [TargetKind::ComplexityOverN, TargetKind::TimeOverN] {
            let ds = desk(2, &[0.0], Basis::Krylov, kind);
            for r in ds.records().filter(|r| r.time_index == 0) {
                assert!(r.target.abs() < 1e-7);
            }
        }
        let ds = desk(2, &[0.0], Basis::Energy, TargetKind::TimeOverN);
        assert_eq!(ds.record(12).target, 12.0 / 8.0);
    }

    #[test]
    fn split_counts() {
        for (m, expected) in [(10, (8, 1, 1)), (40, (32, 4, 4)), (200, (160, 20, 20))] {
            let meta = DatasetMeta {
                n: 2,
                m,
                t: 1,
                betas: vec![0.0],
                basis: Basis::Energy,
                target_kind: TargetKind::ComplexityOverN,
                seed: 0,
            };
            let ds = Dataset::empty(meta);
            let s = split_by_sample(&ds, [0.8, 0.1, 0.1], &mut Rng::new(1)).unwrap();
            let sp = s.split.unwrap();
            assert_eq!((sp.train.len(), sp.val.len(), sp.test.len()), expected);
        }
    }

    #[test]
    fn split_is_leak_free() {
        let ds = desk(10, &[0.0, 3.0], Basis::Energy, TargetKind::ComplexityOverN);
        let ds = split_by_sample(&ds, [0.8, 0.1, 0.1], &mut Rng::new(5)).unwrap();
        let train = ds.split_records(SplitKind::Train).unwrap();
        let test = ds.split_records(SplitKind::Test).unwrap();
        let val = ds.split_records(SplitKind::Val).unwrap();
        assert_eq!(train.len(), 8 * 2 * 24);
        assert_eq!(test.len(), 2 * 24);
        assert_eq!(val.len(), 2 * 24);
        for &i in &train {
            for &j in &test {
                assert_ne!(ds.record(i).sample_id, ds.record(j).sample_id);
            }
        }
    }

    #[test]
    fn split_errors() {
        let ds = desk(3, &[0.0], Basis::Energy, TargetKind::ComplexityOverN);
        assert!(split_by_sample(&ds, [0.8, 0.1, 0.1], &mut Rng::new(0)).is_err());
        assert!(split_by_sample(&ds, [0.5, 0.1, 0.1], &mut Rng::new(0)).is_err());
        assert!(split_by_sample(&ds, [1.2, -0.1, -0.1], &mut Rng::new(0)).is_err());
        assert!(ds.split_records(SplitKind::Train).is_err());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let e = GueEnsemble::generate(4, 1, 3).unwrap();
        let ev = SampleEvolution::compute(&e.samples[0], 0.0, 0, &time_grid(4)).unwrap();
        let mut curve = ev.curve.clone();
        curve.times.pop();
        curve.values.pop();
        let err = build_dataset(core::slice::from_ref(&ev.energy), &[curve], TargetKind::TimeOverN, 4, 0);
        assert!(err.is_err());
        assert!(build_dataset(&[ev.energy], &[], TargetKind::TimeOverN, 4, 0).is_err());
    }
}
