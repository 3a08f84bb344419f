//! Truncation levels, bipower variation, jump detection and the local
//! spot-variance estimators `ĉ(k_n)_i`.

use std::f64::consts::FRAC_PI_2;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SampledPath;
use crate::tuning::{derive_sequences, TuningParams};

/// Bipower variation `(π/2) Σ |ΔX_i| |ΔX_{i+1}|` over the consecutive pairs
/// of a segment of 1-based increment indices. Pairs touching a gap are skipped.
pub fn bipower_variation(path: &SampledPath, segment: RangeInclusive<usize>) -> Result<f64> {
    let (first, last) = (*segment.start(), *segment.end());
    if first == 0 || last > path.n_obs() {
        return Err(Error::config(format!(
            "segment {first}..={last} outside increments 1..={}",
            path.n_obs()
        )));
    }
    if last < first + 1 {
        return Err(Error::sizing(format!("segment {first}..={last} has fewer than 2 increments")));
    }
    let sum: f64 = (first..last)
        .filter(|&i| !path.is_gap(i) && !path.is_gap(i + 1))
        .map(|i| path.increment(i).abs() * path.increment(i + 1).abs())
        .sum();
    Ok(FRAC_PI_2 * sum)
}

/// Truncation level for every increment (element `i - 1` belongs to increment `i`).
///
/// With `per_day`, each day uses `a · sqrt(BV_day / day_length) · Δ^varpi`, so the
/// cutoff follows the daily volatility level. Otherwise one global level
/// `a · Δ^varpi` is used. Gap increments get an infinite level.
pub fn truncation_threshold(path: &SampledPath, tuning: &TuningParams, per_day: bool) -> Result<Vec<f64>> {
    let grid = path.grid();
    let n = path.n_obs();
    let mut levels = vec![f64::INFINITY; n];
    if !per_day {
        let u_n = derive_sequences(grid, tuning, None)?.u_n;
        for (i, level) in levels.iter_mut().enumerate() {
            if !path.is_gap(i + 1) {
                *level = u_n;
            }
        }
        return Ok(levels);
    }
    tuning.validate()?;
    let mesh_factor = grid.mesh().powf(tuning.varpi);
    for day in path.day_spans()? {
        let len = day.end() - day.start() + 1;
        let bv = bipower_variation(path, day.clone())?;
        let rate = bv / (len as f64 * grid.mesh());
        let level = tuning.trunc_const_a * rate.sqrt() * mesh_factor;
        for i in day {
            levels[i - 1] = level;
        }
    }
    Ok(levels)
}

/// Increments classified as jumps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JumpSet {
    /// 1-based increment indices, strictly increasing.
    pub indices: Vec<usize>,
    pub sizes: Vec<f64>,
}

impl JumpSet {
    /// `N^n_T`, the number of detected jumps.
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.sizes.iter().copied())
    }

    /// Keeps the jumps whose index satisfies `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(usize) -> bool) -> JumpSet {
        let (indices, sizes) = self.iter().filter(|&(i, _)| keep(i)).unzip();
        JumpSet { indices, sizes }
    }
}

/// Increments with `|ΔX_i| > max(u_n(i), jump_size_a)`.
pub fn detect_jumps(path: &SampledPath, thresholds: &[f64], jump_size_a: f64) -> Result<JumpSet> {
    if thresholds.len() != path.n_obs() {
        return Err(Error::config(format!(
            "{} thresholds for {} increments",
            thresholds.len(),
            path.n_obs()
        )));
    }
    let mut jumps = JumpSet::default();
    for (i, &u) in (1..=path.n_obs()).zip(thresholds) {
        if path.is_gap(i) {
            continue;
        }
        let dx = path.increment(i);
        if dx.abs() > u.max(jump_size_a) {
            jumps.indices.push(i);
            jumps.sizes.push(dx);
        }
    }
    Ok(jumps)
}

/// Truncated local variance estimates `ĉ(k_n)_i` for `i ∈ [0, n_obs - k_n]`.
///
/// `ĉ_i` averages the squared non-truncated increments `i+1 ..= i+k_n`, per unit
/// of time. The left estimate at a jump `i` is `ĉ_{i-k_n-1}`, the right one is `ĉ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalVolSeries {
    k_n: usize,
    c_hat: Vec<Option<f64>>,
}

impl LocalVolSeries {
    pub fn k_n(&self) -> usize {
        self.k_n
    }

    /// `ĉ_i`, or `None` outside the valid range or when the window contains a gap.
    pub fn get(&self, i: usize) -> Option<f64> {
        self.c_hat.get(i).copied().flatten()
    }

    /// Estimates around the jump at increment `i`: `(ĉ_{i-k-1}, ĉ_i)`.
    pub fn around(&self, i: usize) -> Option<(f64, f64)> {
        let left = i.checked_sub(self.k_n + 1).and_then(|j| self.get(j))?;
        Some((left, self.get(i)?))
    }

    /// Largest index with an estimate slot, `n_obs - k_n`.
    pub fn last_index(&self) -> usize {
        self.c_hat.len() - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.c_hat.iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c)))
    }
}

pub fn local_vol(path: &SampledPath, k_n: usize, thresholds: &[f64]) -> Result<LocalVolSeries> {
    let n = path.n_obs();
    if k_n == 0 {
        return Err(Error::sizing("window k_n must be at least 1"));
    }
    if k_n > n {
        return Err(Error::sizing(format!("window k_n = {k_n} exceeds {n} increments")));
    }
    if thresholds.len() != n {
        return Err(Error::config(format!("{} thresholds for {n} increments", thresholds.len())));
    }

    // Partial sums restart every k_n increments so that a window sum never
    // subtracts two large accumulated totals.
    let mut block_sum = vec![0.0; n + 1];
    let mut gaps = vec![0usize; n + 1];
    for i in 1..=n {
        let dx = path.increment(i);
        let kept = if !path.is_gap(i) && dx.abs() <= thresholds[i - 1] { dx * dx } else { 0.0 };
        let carry = if (i - 1) % k_n == 0 { 0.0 } else { block_sum[i - 1] };
        block_sum[i] = carry + kept;
        gaps[i] = gaps[i - 1] + usize::from(path.is_gap(i));
    }
    let window_sum = |first: usize, last: usize| -> f64 {
        let block_start = |j: usize| (j - 1) / k_n * k_n + 1;
        if block_start(first) == first {
            return block_sum[last];
        }
        let end_of_first = block_start(first) + k_n - 1;
        let head = block_sum[end_of_first] - block_sum[first - 1];
        if last == end_of_first {
            head
        } else {
            head + block_sum[last]
        }
    };

    let scale = 1.0 / (k_n as f64 * path.grid().mesh());
    let c_hat = (0..=n - k_n)
        .map(|i| (gaps[i + k_n] == gaps[i]).then(|| window_sum(i + 1, i + k_n) * scale))
        .collect();
    Ok(LocalVolSeries { k_n, c_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SamplingGrid;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn path_from_increments(incs: &[f64], mesh: f64) -> SampledPath {
        let grid = SamplingGrid::from_mesh(mesh, incs.len()).unwrap();
        let mut values = vec![0.0];
        for dx in incs {
            values.push(values.last().unwrap() + dx);
        }
        SampledPath::new(grid, values).unwrap()
    }

    fn brownian(sigma: f64, per_day: usize, days: usize, seed: u64) -> SampledPath {
        let grid = SamplingGrid::days(days, per_day).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = sigma * grid.mesh().sqrt();
        let mut values = Vec::with_capacity(grid.n_obs() + 1);
        let mut x = 0.0;
        values.push(x);
        for _ in 0..grid.n_obs() {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += sd * z;
            values.push(x);
        }
        SampledPath::new(grid, values).unwrap()
    }

    fn brute_bv(incs: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..incs.len() - 1 {
            s += incs[i].abs() * incs[i + 1].abs();
        }
        FRAC_PI_2 * s
    }

    #[test]
    fn bipower_constant_increments() {
        let h = 0.003;
        let p = path_from_increments(&[h; 10], 0.1);
        let bv = bipower_variation(&p, 1..=10).unwrap();
        assert!((bv - FRAC_PI_2 * 9.0 * h * h).abs() < 1e-15);
    }

    #[test]
    fn bipower_alternating_signs() {
        let p = path_from_increments(&[0.01, -0.01, 0.01], 0.1);
        let bv = bipower_variation(&p, 1..=3).unwrap();
        assert!((bv - 0.000_314_159_265).abs() < 1e-12);
    }

    #[test]
    fn bipower_zero_breaks_pairs() {
        let incs = [0.02, 0.0, 0.03, -0.01, 0.0, 0.5, 0.2];
        let p = path_from_increments(&incs, 0.1);
        let bv = bipower_variation(&p, 1..=7).unwrap();
        assert!((bv - brute_bv(&incs)).abs() < 1e-15);
        assert!((bv - FRAC_PI_2 * (0.03 * 0.01 + 0.5 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn bipower_short_segment_rejected() {
        let p = path_from_increments(&[0.1, 0.2], 0.5);
        assert!(matches!(bipower_variation(&p, 2..=2), Err(Error::Sizing(_))));
    }

    #[test]
    fn daily_threshold_tracks_volatility() {
        let sigma = 0.2;
        let p = brownian(sigma, 10_000, 1, 7);
        let t = TuningParams::default();
        let levels = truncation_threshold(&p, &t, true).unwrap();
        let ideal = t.trunc_const_a * sigma * p.grid().mesh().powf(t.varpi);
        assert!(levels.iter().all(|&u| u == levels[0]));
        assert!((levels[0] / ideal - 1.0).abs() < 0.25, "{} vs {}", levels[0], ideal);
    }

    #[test]
    fn doubling_increments_doubles_thresholds() {
        let p = brownian(0.3, 500, 2, 3);
        let t = TuningParams { window_const: 1.0, ..Default::default() };
        let base = truncation_threshold(&p, &t, true).unwrap();
        let doubled = truncation_threshold(&p.scaled(2.0), &t, true).unwrap();
        for (a, b) in base.iter().zip(&doubled) {
            assert!((b / a - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_day_has_zero_threshold() {
        let mut incs = vec![0.0; 100];
        incs.extend(std::iter::repeat_n(0.01, 100));
        let p = path_from_increments(&incs, 0.01);
        let levels = truncation_threshold(&p, &TuningParams::default(), true).unwrap();
        assert_eq!(levels[0], 0.0);
        assert!(levels[150] > 0.0);
        let jumps = detect_jumps(&p, &levels, 0.0).unwrap();
        // zero increments are never jumps
        assert!(jumps.indices.iter().all(|&i| i > 100));
    }

    #[test]
    fn global_threshold_is_constant() {
        let p = brownian(0.3, 1000, 2, 1);
        let t = TuningParams::default();
        let levels = truncation_threshold(&p, &t, false).unwrap();
        let expected = 5.0 * 0.001f64.powf(0.49);
        assert!(levels.iter().all(|&u| (u - expected).abs() < 1e-15));
    }

    #[test]
    fn detects_single_large_increment() {
        let mut incs = vec![1e-4; 50];
        incs[20] = 0.5;
        let p = path_from_increments(&incs, 0.02);
        let u = vec![0.01; 50];
        let jumps = detect_jumps(&p, &u, 0.0).unwrap();
        assert_eq!(jumps.count(), 1);
        assert_eq!(jumps.indices, vec![21]);
        assert!((jumps.sizes[0] - 0.5).abs() < 1e-12);

        let none = detect_jumps(&p, &u, 0.6).unwrap();
        assert_eq!(none.count(), 0);
        assert!(detect_jumps(&p, &u[1..], 0.0).is_err());
    }

    #[test]
    fn local_vol_constant_increments() {
        let c = 0.002;
        let mesh = 0.01;
        let p = path_from_increments(&[c; 40], mesh);
        let vol = local_vol(&p, 7, &[0.01; 40]).unwrap();
        assert_eq!(vol.last_index(), 33);
        for (_, v) in vol.iter() {
            assert!((v - c * c / mesh).abs() < 1e-15);
        }
        assert_eq!(vol.get(34), None);
    }

    #[test]
    fn local_vol_fully_truncated() {
        let p = path_from_increments(&[0.05; 40], 0.01);
        let vol = local_vol(&p, 5, &[0.01; 40]).unwrap();
        assert!(vol.iter().all(|(_, v)| v == 0.0));
    }

    #[test]
    fn local_vol_matches_direct_sum() {
        let p = brownian(0.5, 997, 1, 11);
        let u = vec![0.05; p.n_obs()];
        for k in [1, 2, 13, 64, 500] {
            let vol = local_vol(&p, k, &u).unwrap();
            for i in (0..=p.n_obs() - k).step_by(37) {
                let direct: f64 = (i + 1..=i + k)
                    .map(|j| p.increment(j))
                    .filter(|dx| dx.abs() <= 0.05)
                    .map(|dx| dx * dx)
                    .sum::<f64>()
                    / (k as f64 * p.grid().mesh());
                let got = vol.get(i).unwrap();
                assert!((got - direct).abs() <= 1e-12 * direct, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn local_vol_rejects_large_window() {
        let p = path_from_increments(&[0.1; 10], 0.1);
        assert!(matches!(local_vol(&p, 11, &[1.0; 10]), Err(Error::Sizing(_))));
    }

    #[test]
    fn windows_never_cross_gaps() {
        let grid = SamplingGrid::from_mesh(0.1, 20).unwrap();
        let values: Vec<f64> = (0..=20).map(|i| (i as f64 * 0.37).sin()).collect();
        let p = SampledPath::with_sessions(grid, values, vec![1..=10, 12..=20]).unwrap();
        let vol = local_vol(&p, 3, &[10.0; 20]).unwrap();
        // windows {i+1..i+3} containing increment 11
        for i in 8..=10 {
            assert_eq!(vol.get(i), None);
        }
        assert!(vol.get(7).is_some());
        assert!(vol.get(11).is_some());
        let big_jump_everywhere = detect_jumps(&p, &[0.0; 20], 0.0).unwrap();
        assert!(!big_jump_everywhere.indices.contains(&11));
    }

    #[test]
    fn mean_local_vol_recovers_variance() {
        let sigma = 0.3;
        let p = brownian(sigma, 4680, 1, 5);
        let t = TuningParams::default();
        let u = truncation_threshold(&p, &t, true).unwrap();
        let vol = local_vol(&p, 147, &u).unwrap();
        let (s, n) = vol.iter().fold((0.0, 0), |(s, n), (_, v)| (s + v, n + 1));
        let mean = s / n as f64;
        assert!((mean / (sigma * sigma) - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn local_vol_converges_on_fine_grid() {
        let sigma = 0.2;
        let p = brownian(sigma, 100_000, 1, 9);
        let t = TuningParams::default();
        let u = truncation_threshold(&p, &t, true).unwrap();
        let k = crate::tuning::window_size(p.grid(), &t).unwrap();
        let vol = local_vol(&p, k, &u).unwrap();
        let (s, n) = vol.iter().fold((0.0, 0), |(s, n), (_, v)| (s + v, n + 1));
        assert!((s / n as f64 / (sigma * sigma) - 1.0).abs() < 0.02);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scaling_is_exact(seed in 0u64..1000, log_lambda in -3.0f64..3.0) {
            let lambda = 10f64.powf(log_lambda);
            let mut p = brownian(0.4, 400, 2, seed);
            // plant a jump
            let mut values = p.values().to_vec();
            for v in values.iter_mut().skip(333) {
                *v += 0.2;
            }
            p = SampledPath::new(*p.grid(), values).unwrap();
            let t = TuningParams { window_const: 1.0, ..Default::default() };
            let k = 20;
            let u = truncation_threshold(&p, &t, true).unwrap();
            let scaled = p.scaled(lambda);
            let us = truncation_threshold(&scaled, &t, true).unwrap();
            let a = local_vol(&p, k, &u).unwrap();
            let b = local_vol(&scaled, k, &us).unwrap();
            for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
                prop_assert!((y - lambda * lambda * x).abs() <= 1e-12 * lambda * lambda * x.abs().max(1e-300));
            }
            let ja = detect_jumps(&p, &u, 0.0).unwrap();
            let jb = detect_jumps(&scaled, &us, 0.0).unwrap();
            prop_assert_eq!(ja.indices, jb.indices);
        }

        #[test]
        fn larger_cutoff_never_lowers_estimates(seed in 0u64..1000, bump in 1.0f64..3.0) {
            let p = brownian(0.4, 300, 1, seed);
            let u: Vec<f64> = (0..p.n_obs()).map(|i| 0.02 + 0.01 * ((i % 7) as f64)).collect();
            let u2: Vec<f64> = u.iter().enumerate().map(|(i, v)| if i % 3 == 0 { v * bump } else { *v }).collect();
            let a = local_vol(&p, 17, &u).unwrap();
            let b = local_vol(&p, 17, &u2).unwrap();
            for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
                prop_assert!(y >= x * (1.0 - 1e-12));
            }
        }
    }
}
