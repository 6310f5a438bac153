//! Reproducible sample generators: shifted Halton clouds and random periodic
//! test functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::discretization::{DiscreteFunction, Grid};

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut c = 2u64;
    while primes.len() < k {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// `count` points of the Halton sequence in `[0, 1)^dim` under a seeded
/// Cranley-Patterson rotation (a random shift modulo 1).
pub fn halton_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let primes = first_primes(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            primes
                .iter()
                .zip(&shift)
                .map(|(&p, s)| (radical_inverse(i, p) + s).fract())
                .collect()
        })
        .collect()
}

/// Maps unit-cube points affinely onto the box `lo..hi` (per coordinate).
pub fn scale_to_box(points: &mut [Vec<f64>], lo: &[f64], hi: &[f64]) {
    for p in points {
        for (k, c) in p.iter_mut().enumerate() {
            *c = lo[k] + (hi[k] - lo[k]) * *c;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random unit vector in `R^dim`.
pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 1e-8 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Smooth random periodic function: a trigonometric polynomial of degree
/// `modes` with Gaussian coefficients decaying like `1 / (1 + k)`, times
/// `amplitude`.
pub fn random_smooth<R: Rng>(rng: &mut R, grid: Grid, dim: usize, modes: usize, amplitude: f64) -> DiscreteFunction {
    let omega = std::f64::consts::PI / grid.half_length();
    let coeffs: Vec<(f64, f64)> = (0..(modes + 1) * dim)
        .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect();
    DiscreteFunction::from_fn(grid, dim, |t, out| {
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..=modes {
                let (a, b) = coeffs[c * (modes + 1) + k];
                let w = amplitude / (1.0 + k as f64);
                s += w * (a * (k as f64 * omega * t).cos() + if k == 0 { 0.0 } else { b * (k as f64 * omega * t).sin() });
            }
            *o = s;
        }
    })
}

/// Rough random periodic function: independent uniform nodal values in
/// `[-amplitude, amplitude]`.
pub fn random_nodal<R: Rng>(rng: &mut R, grid: Grid, dim: usize, amplitude: f64) -> DiscreteFunction {
    DiscreteFunction::from_fn(grid, dim, |_, out| {
        for o in out.iter_mut() {
            *o = rng.random_range(-amplitude..=amplitude);
        }
    })
}

/// Alternates smooth and rough random functions with random amplitudes in
/// `[amp_lo, amp_hi]`, so property sweeps see both regimes.
pub fn random_periodic<R: Rng>(rng: &mut R, grid: Grid, dim: usize, index: usize, amp_lo: f64, amp_hi: f64) -> DiscreteFunction {
    let amp = amp_lo * (amp_hi / amp_lo).powf(rng.random::<f64>());
    if index % 2 == 0 {
        random_smooth(rng, grid, dim, 6, amp)
    } else {
        random_nodal(rng, grid, dim, amp)
    }
}
