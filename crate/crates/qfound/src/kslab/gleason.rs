//! Frame-function fitting and the two-valued measure on the real plane.

use crate::numkernel::random::{random_density, random_unitary, seeded, TestRng};
use rand::Rng;
use crate::numkernel::{hermitian_eigendecomposition, Operator, StateVector, TolerancePolicy, C64};
use crate::report::CheckReport;
use std::f64::consts::PI;

/// One orthonormal basis with the frame-function value on each vector.
#[derive(Debug, Clone)]
pub struct FrameSample {
    pub basis: Vec<StateVector>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GleasonFit {
    pub t: Operator,
    /// max |f(x) − ⟨x,Tx⟩| over sampled vectors
    pub residual: f64,
    /// mean of the per-basis weight sums
    pub weight: f64,
    /// true when the samples fix fewer than d² real parameters
    pub underdetermined: bool,
    pub rank: usize,
}

/// Real coefficients of ⟨x,Tx⟩ in the d² Hermitian parameters
/// (diagonal entries, then Re/Im of each upper entry).
fn design_row(x: &StateVector, d: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(d * d);
    for i in 0..d {
        row.push(x[i].norm_sqr());
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let z = x[i].conj() * x[j];
            row.push(2.0 * z.re);
            row.push(-2.0 * z.im);
        }
    }
    row
}

fn assemble(params: &[f64], d: usize) -> Operator {
    let mut t = Operator::zeros(d);
    for i in 0..d {
        t[(i, i)] = C64::new(params[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = C64::new(params[k], params[k + 1]);
            t[(i, j)] = z;
            t[(j, i)] = z.conj();
            k += 2;
        }
    }
    t
}

/// Least-squares Hermitian T with f(x) ≈ ⟨x,Tx⟩.
pub fn gleason_fit(samples: &[FrameSample], d: usize, pol: &TolerancePolicy) -> GleasonFit {
    let np = d * d;
    let mut ata = vec![0.0; np * np];
    let mut atb = vec![0.0; np];
    let mut rows = Vec::new();
    for s in samples {
        for (x, &f) in s.basis.iter().zip(&s.weights) {
            let row = design_row(x, d);
            for a in 0..np {
                atb[a] += row[a] * f;
                for b in 0..np {
                    ata[a * np + b] += row[a] * row[b];
                }
            }
            rows.push((row, f));
        }
    }
    // pseudo-inverse of the normal matrix through its eigendecomposition
    let normal = Operator::from_vec(np, ata.iter().map(|&x| C64::new(x, 0.0)).collect()).expect("finite normal matrix");
    let e = hermitian_eigendecomposition(&normal, pol).expect("normal matrix is symmetric");
    let lmax = e.values.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let cut = pol.rank_tol_factor.max(1e-13) * lmax;
    let mut params = vec![0.0; np];
    let mut rank = 0;
    for (lam, v) in e.values.iter().zip(&e.vectors) {
        if *lam <= cut {
            continue;
        }
        rank += 1;
        let proj: f64 = (0..np).map(|k| v[k].re * atb[k]).sum::<f64>();
        for (k, p) in params.iter_mut().enumerate() {
            *p += v[k].re * proj / lam;
        }
    }
    let residual = rows
        .iter()
        .map(|(row, f)| (row.iter().zip(&params).map(|(a, b)| a * b).sum::<f64>() - f).abs())
        .fold(0.0, f64::max);
    let weight = if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|s| s.weights.iter().sum::<f64>()).sum::<f64>() / samples.len() as f64
    };
    GleasonFit { t: assemble(&params, d), residual, weight, underdetermined: rank < np, rank }
}

/// Sample f(x) = ⟨x,Tx⟩ on `count` random orthonormal bases.
pub fn sample_frame_function(t: &Operator, count: usize, rng: &mut TestRng) -> Vec<FrameSample> {
    let d = t.dim();
    (0..count)
        .map(|_| {
            let u = random_unitary(rng, d);
            let basis: Vec<StateVector> = (0..d).map(|k| u.column(k)).collect();
            let weights = basis.iter().map(|x| t.expectation(x).expect("matching dimension")).collect();
            FrameSample { basis, weights }
        })
        .collect()
}

/// Angle of grid index k in [0, 4n): θ_k = k·(π/2)/n.
pub fn grid_angle(k: usize, n: usize) -> f64 {
    k as f64 * (PI / 2.0) / n as f64
}

/// μ(P_θ) on the full circle from g on [0, π/2):
/// g, then 1 − g, then g, then 1 − g on successive quarter turns.
pub fn dim2_measure(g: &[u8]) -> Vec<u8> {
    let n = g.len();
    (0..4 * n)
        .map(|k| {
            let (quarter, j) = (k / n, k % n);
            if quarter % 2 == 0 {
                g[j]
            } else {
                1 - g[j]
            }
        })
        .collect()
}

/// Check additivity on orthogonal pairs and the sign identification P_θ = P_{θ+π}.
pub fn dim2_two_valued_measure(g: &[u8]) -> CheckReport {
    let mut rep = CheckReport::new();
    let n = g.len();
    rep.flag("grid nonempty and two-valued", n > 0 && g.iter().all(|&v| v <= 1));
    if n == 0 || g.iter().any(|&v| v > 1) {
        return rep;
    }
    let mu = dim2_measure(g);
    let m = 4 * n;
    let additivity = (0..m).filter(|&k| mu[k] + mu[(k + n) % m] != 1).count();
    let sign = (0..m).filter(|&k| mu[k] != mu[(k + 2 * n) % m]).count();
    rep.equal("additivity failures", additivity, 0usize);
    rep.equal("sign identification failures", sign, 0usize);
    rep.info("grid points", n);
    rep
}

/// Fit `operators` seeded random density matrices in dimension `d` from
/// `bases` sampled bases each and report the worst deviations.
pub fn gleason_checks(seed: u64, operators: usize, bases: usize, d: usize, pol: &TolerancePolicy) -> CheckReport {
    let mut rng = seeded(seed);
    let (mut recover, mut resid, mut weight) = (0.0f64, 0.0f64, 0.0f64);
    let mut underdetermined = 0usize;
    for _ in 0..operators {
        let t = random_density(&mut rng, d).matrix().clone();
        let fit = gleason_fit(&sample_frame_function(&t, bases, &mut rng), d, pol);
        recover = recover.max(fit.t.max_diff(&t));
        resid = resid.max(fit.residual);
        weight = weight.max((fit.t.trace().re - fit.weight).abs());
        underdetermined += fit.underdetermined as usize;
    }
    let mut rep = CheckReport::new();
    rep.equal("underdetermined fits", underdetermined, 0usize);
    rep.residual(format!("max |T_fit − T| over {operators} operators"), recover, 1e-8);
    rep.residual("max frame-function residual", resid, 1e-8);
    rep.residual("max |tr T − W|", weight, 1e-8);
    rep
}

/// Random two-valued g on a grid of `points` angles around the circle.
pub fn random_dim2_grid(seed: u64, points: usize) -> Vec<u8> {
    let mut rng = seeded(seed);
    (0..points / 4).map(|_| rng.random_range(0..=1u8)).collect()
}

/// Unit vector at angle θ in the plane.
pub fn plane_ray(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_function() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(1);
        let t = Operator::identity(3).scale_re(1.0 / 3.0);
        let fit = gleason_fit(&sample_frame_function(&t, 10, &mut rng), 3, &pol);
        assert!(fit.t.max_diff(&t) < 1e-10);
        assert!((fit.weight - 1.0).abs() < 1e-12);
        assert!(!fit.underdetermined);
    }

    #[test]
    fn rank_one_projector() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(2);
        let t = Operator::diag(&[1.0, 0.0, 0.0]);
        let fit = gleason_fit(&sample_frame_function(&t, 10, &mut rng), 3, &pol);
        assert!(fit.t.max_diff(&t) < 1e-10);
    }

    #[test]
    fn recovery_d2_to_d4() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(3);
        for d in 2..=4 {
            let t = random_density(&mut rng, d).matrix().clone();
            let fit = gleason_fit(&sample_frame_function(&t, 50, &mut rng), d, &pol);
            assert!(fit.t.max_diff(&t) < 1e-8);
            assert!(fit.residual < 1e-8);
            assert!((fit.t.trace().re - fit.weight).abs() < 1e-8);
        }
    }

    #[test]
    fn too_few_samples() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(4);
        let t = Operator::diag(&[0.5, 0.3, 0.2]);
        let fit = gleason_fit(&sample_frame_function(&t, 1, &mut rng), 3, &pol);
        assert!(fit.underdetermined);
    }

    #[test]
    fn dim2_constant_grids() {
        let ones = vec![1u8; 90];
        let mu = dim2_measure(&ones);
        assert!(mu[..90].iter().all(|&v| v == 1) && mu[90..180].iter().all(|&v| v == 0));
        assert!(mu[180..270].iter().all(|&v| v == 1) && mu[270..].iter().all(|&v| v == 0));
        assert!(dim2_two_valued_measure(&ones).passed());
        assert!(dim2_two_valued_measure(&[0u8; 90]).passed());
        assert!(!dim2_two_valued_measure(&[2u8]).passed());
    }
}
