//! Seeded random generators for test ensembles and sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blockdiag::{BlockState, OddTail};
use crate::geometry::project_tangent;
use crate::integrate::PhaseState;
use crate::linalg::{matrix_exp, polar_decompose, GroupPoint, SquareMatrix};

pub type SeededRng = ChaCha8Rng;

/// Environment variable that overrides the default seed.
pub const SEED_ENV: &str = "SLNGEO_SEED";

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed from `SLNGEO_SEED` when set and parseable, else `default`.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(default)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> SquareMatrix {
    SquareMatrix::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

pub fn random_traceless<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> SquareMatrix {
    let g = gaussian_matrix(rng, n, sigma);
    let t = g.trace() / n as f64;
    g - SquareMatrix::identity(n).scale(t)
}

/// `exp` of a traceless Gaussian matrix, renormalised onto `det = 1`.
pub fn random_sl<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> GroupPoint {
    let a = matrix_exp(&random_traceless(rng, n, sigma));
    GroupPoint::normalized(a).expect("exponential has positive determinant")
}

/// Rotation factor of a Gaussian matrix, with the sign fixed to `det = +1`.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SquareMatrix {
    loop {
        let mut g = gaussian_matrix(rng, n, 1.0);
        let det = g.det();
        if det.abs() < 1e-6 {
            continue;
        }
        if det < 0.0 {
            for j in 0..n {
                g.set(0, j, -g.get(0, j));
            }
        }
        if let Ok(p) = polar_decompose(&g) {
            return p.rotation;
        }
    }
}

/// Unit-norm tangent vector at `a`.
pub fn random_tangent<R: Rng + ?Sized>(rng: &mut R, a: &GroupPoint) -> SquareMatrix {
    let v = project_tangent(a, &gaussian_matrix(rng, a.dim(), 1.0));
    let norm = v.hs_norm();
    v.scale(1.0 / norm)
}

pub fn random_phase_state<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> PhaseState {
    let a = random_sl(rng, n, sigma);
    let v = random_tangent(rng, &a);
    PhaseState::new(a, v).expect("projected velocity is tangent")
}

/// Strictly upper triangular matrix with entries uniform in `[-1, 1]`,
/// conjugated by a random rotation.
pub fn random_nilpotent<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SquareMatrix {
    let u = SquareMatrix::from_fn(n, |i, j| {
        if j > i {
            rng.random_range(-1.0..=1.0)
        } else {
            0.0
        }
    });
    let o = random_rotation(rng, n);
    &o * &u * o.transpose()
}

/// Random symmetric positive definite matrix with unit determinant.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> SquareMatrix {
    let s = random_traceless(rng, n, sigma).symmetric_part();
    matrix_exp(&s).symmetric_part()
}

/// Random valid block state with `m` blocks, plus a 1x1 tail when `odd`.
pub fn random_block_state<R: Rng + ?Sized>(rng: &mut R, m: usize, odd: bool, sigma: f64) -> BlockState {
    let mut normal = || sigma * rng.sample::<f64, _>(StandardNormal);
    let mut b0 = Vec::with_capacity(m);
    let mut b1 = Vec::with_capacity(m);
    let mut b2 = Vec::with_capacity(m);
    for _ in 0..m {
        let (x, y) = (normal(), normal());
        b0.push(x.hypot(y) + normal().exp());
        b1.push(x);
        b2.push(y);
    }
    let mut tail = odd.then(|| OddTail {
        b_inf: normal().exp(),
        w_inf: normal(),
    });
    let w1: Vec<f64> = (0..m).map(|_| normal()).collect();
    let w2: Vec<f64> = (0..m).map(|_| normal()).collect();
    let mut w0: Vec<f64> = (0..m).map(|_| normal()).collect();
    let z: Vec<f64> = (0..m).map(|_| normal()).collect();

    let n = 2 * m + usize::from(odd);
    let det: f64 = (0..m).map(|i| b0[i] * b0[i] - b1[i] * b1[i] - b2[i] * b2[i]).product::<f64>()
        * tail.map_or(1.0, |t| t.b_inf);
    let c = det.powf(-1.0 / n as f64);
    for v in [&mut b0, &mut b1, &mut b2] {
        v.iter_mut().for_each(|x| *x *= c);
    }
    if let Some(t) = tail.as_mut() {
        t.b_inf *= c;
    }
    let dot: f64 = (0..m).map(|i| b0[i] * w0[i] + b1[i] * w1[i] + b2[i] * w2[i]).sum::<f64>()
        + tail.map_or(0.0, |t| 0.5 * t.b_inf * t.w_inf);
    let half_trace = b0.iter().sum::<f64>() + tail.map_or(0.0, |t| 0.5 * t.b_inf);
    let k = dot / half_trace;
    w0.iter_mut().for_each(|x| *x -= k);
    if let Some(t) = tail.as_mut() {
        t.w_inf -= k;
    }
    BlockState::new(b0, b1, b2, w0, w1, w2, z, tail).expect("constructed to satisfy the block constraints")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_repeat() {
        let a = random_sl(&mut rng(7), 3, 0.3);
        let b = random_sl(&mut rng(7), 3, 0.3);
        assert_eq!(a, b);
    }

    #[test]
    fn generators_respect_constraints() {
        let mut r = rng(1);
        for n in 2..=6 {
            let o = random_rotation(&mut r, n);
            assert!((o.transpose() * &o - SquareMatrix::identity(n)).hs_norm() < 1e-12);
            assert!((o.det() - 1.0).abs() < 1e-12);
            let m = random_nilpotent(&mut r, n);
            assert!(m.powi(n as u32).hs_norm() < 1e-12);
            let s = random_phase_state(&mut r, n, 0.3);
            assert!((s.adot.hs_norm() - 1.0).abs() < 1e-12);
        }
    }
}
