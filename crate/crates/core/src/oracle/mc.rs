//! Monte Carlo measure estimates with a counter-based generator.
//!
//! Reproducibility contract: sample `i` of seed `s` is a pure function of
//! `(s, i)`. The per-sample stream seeds a SplitMix64 state with
//! `s XOR (i+1) * 0xA24BAED4963EE407`, then draws 64-bit outputs through the
//! standard SplitMix64 finalizer. Uniforms map a draw `x` to
//! `((x >> 11) + 0.5) * 2^-53`, normals come from Box-Muller pairs and
//! exponentials from inverse CDF. Because the estimate is a sum of
//! per-sample indicators, sharding the counter space over threads changes
//! nothing.

use serde::Serialize;

use crate::moments::{MeasureKind, MeasureSpec};
use crate::par::maybe_par_map;
use crate::relax::SemiAlgebraicSet;

use super::{coordinate_std, total_mass};

const STREAM_GAMMA: u64 = 0xA24BAED4963EE407;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[inline]
fn uniform_open(state: &mut u64) -> f64 {
    ((splitmix64(state) >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Fill `x` with the coordinates of sample `index` under the probability law
/// proportional to the density of `spec`.
fn fill_sample(spec: &MeasureSpec, seed: u64, index: u64, x: &mut [f64]) {
    let mut state = seed ^ index.wrapping_add(1).wrapping_mul(STREAM_GAMMA);
    match spec.kind {
        MeasureKind::Gaussian => {
            let std = coordinate_std(spec);
            let n = x.len();
            let mut j = 0;
            while j < n {
                let u1 = uniform_open(&mut state);
                let u2 = uniform_open(&mut state);
                let r = (-2.0 * u1.ln()).sqrt();
                let theta = 2.0 * std::f64::consts::PI * u2;
                x[j] = std * r * theta.cos();
                if j + 1 < n {
                    x[j + 1] = std * r * theta.sin();
                }
                j += 2;
            }
        }
        MeasureKind::Exponential => {
            for xi in x.iter_mut() {
                *xi = -uniform_open(&mut state).ln() / spec.param;
            }
        }
    }
}

/// Sample `index` of the stream `(spec, seed)`; exposed so validation code
/// can classify individual points.
pub fn sample_point(spec: &MeasureSpec, seed: u64, index: u64) -> Vec<f64> {
    let mut x = vec![0.0; spec.n];
    fill_sample(spec, seed, index, &mut x);
    x
}

/// Monte Carlo estimate of the measure of a set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub value: f64,
    /// Binomial standard error `mass * sqrt(p (1-p) / N)`.
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

const CHUNK: u64 = 1 << 16;

fn mc_impl(
    set: &SemiAlgebraicSet,
    spec: &MeasureSpec,
    samples: u64,
    seed: u64,
    parallel: bool,
) -> McEstimate {
    assert!(samples >= 1, "at least one sample");
    assert_eq!(set.dim(), spec.n, "set/measure dimension mismatch");
    let chunks = samples.div_ceil(CHUNK) as usize;
    let hits: u64 = maybe_par_map(chunks, parallel, |c| {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(samples);
        let mut x = [0.0f64; 16];
        let x = &mut x[..spec.n];
        let mut h = 0u64;
        for i in lo..hi {
            fill_sample(spec, seed, i, x);
            if set.contains(x) {
                h += 1;
            }
        }
        h
    })
    .into_iter()
    .sum();
    let mass = total_mass(spec);
    let p = hits as f64 / samples as f64;
    McEstimate {
        value: mass * p,
        stderr: mass * (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        seed,
    }
}

/// Estimate the measure of `set` from `samples` i.i.d. draws. Deterministic
/// per `(seed, samples)`; the parallel and sequential paths agree exactly.
pub fn mc_measure(
    set: &SemiAlgebraicSet,
    spec: &MeasureSpec,
    samples: u64,
    seed: u64,
) -> McEstimate {
    mc_impl(set, spec, samples, seed, cfg!(feature = "parallel"))
}

/// Single-threaded reference path of [`mc_measure`].
pub fn mc_measure_sequential(
    set: &SemiAlgebraicSet,
    spec: &MeasureSpec,
    samples: u64,
    seed: u64,
) -> McEstimate {
    mc_impl(set, spec, samples, seed, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Convention;
    use crate::poly::{MultiIndex, Poly};
    use approx::assert_relative_eq;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn unit_disc() -> SemiAlgebraicSet {
        let g = Poly::from_terms(
            2,
            [(mi(&[0, 0]), 1.0), (mi(&[2, 0]), -1.0), (mi(&[0, 2]), -1.0)],
        )
        .unwrap();
        SemiAlgebraicSet::new(2, vec![g]).unwrap()
    }

    #[test]
    fn empty_set_estimates_zero_exactly() {
        let g = Poly::from_terms(
            2,
            [(mi(&[0, 0]), -1.0), (mi(&[2, 0]), -1.0), (mi(&[0, 2]), -1.0)],
        )
        .unwrap();
        let set = SemiAlgebraicSet::new(2, vec![g]).unwrap();
        let spec = MeasureSpec::gaussian(2, 1.0, Convention::StandardNormalized).unwrap();
        let est = mc_measure(&set, &spec, 10_000, 7);
        assert_eq!(est.value, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn estimates_are_seed_reproducible_and_thread_invariant() {
        let set = unit_disc();
        let spec = MeasureSpec::gaussian(2, 1.0, Convention::StandardNormalized).unwrap();
        let a = mc_measure(&set, &spec, 200_000, 42);
        let b = mc_measure(&set, &spec, 200_000, 42);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let c = mc_measure_sequential(&set, &spec, 200_000, 42);
        assert_eq!(a.value.to_bits(), c.value.to_bits());
        let d = mc_measure(&set, &spec, 200_000, 43);
        assert_ne!(a.value.to_bits(), d.value.to_bits());
    }

    #[test]
    fn disc_estimate_is_near_the_closed_form() {
        let set = unit_disc();
        let spec = MeasureSpec::gaussian(2, 1.0, Convention::StandardNormalized).unwrap();
        let est = mc_measure(&set, &spec, 400_000, 11);
        let exact = 0.3934693402873666;
        assert!(
            (est.value - exact).abs() <= 4.0 * est.stderr,
            "value {} exact {exact} stderr {}",
            est.value,
            est.stderr
        );
        assert_relative_eq!(est.stderr, est.stderr.abs());
    }

    #[test]
    fn exponential_sampling_stays_in_the_orthant() {
        let spec = MeasureSpec::exponential(2, 5.0).unwrap();
        for i in 0..1000 {
            let x = sample_point(&spec, 9, i);
            assert!(x.iter().all(|&v| v >= 0.0));
        }
    }
}
