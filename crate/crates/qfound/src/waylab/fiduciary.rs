//! The fiduciary apparatus: a preparation ξ spread evenly over the charge
//! values |λ| ≤ N, pointer states X_γ on |λ| ≤ N − 2l and noise states η_γ
//! that absorb the charge mismatch at the edges of the spectrum.
//!
//! The apparatus space is a direct sum of L2-eigenspaces H₂,λ for
//! |λ| ≤ N + l, each of dimension 2·dim H₁. Within a block the first dim H₁
//! coordinates host the pointer components and the rest host the noise.

use super::{extend_conserving_unitary, integer_spectrum, total_charge, WayError};
use crate::numkernel::{hermitian_eigendecomposition, Operator, StateVector, TolerancePolicy, C64, ZERO};
use crate::report::{CheckReport, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct FiduciaryApparatus {
    pub l: i64,
    pub epsilon: f64,
    pub n: i64,
    /// measured observable and system charge
    pub m: Operator,
    pub l1: Operator,
    /// eigenbasis φ_γ of M, γ ↔ (μ, k)
    pub phi: Vec<StateVector>,
    pub labels: Vec<(usize, usize)>,
    pub mu_values: Vec<f64>,
    pub psi: StateVector,
    pub block_dim: usize,
    pub xi: StateVector,
    pub x: Vec<StateVector>,
    pub eta: Vec<StateVector>,
}

/// The four charge ranges of the inner-product preservation argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaRange {
    Outside,
    Upper,
    Middle,
    Inner,
}

impl LambdaRange {
    pub const ALL: [LambdaRange; 4] = [LambdaRange::Outside, LambdaRange::Upper, LambdaRange::Middle, LambdaRange::Inner];

    pub fn classify(lambda: i64, n: i64, l: i64) -> Self {
        let a = lambda.abs();
        if a > n + l {
            LambdaRange::Outside
        } else if a > n - l {
            LambdaRange::Upper
        } else if a > n - 3 * l {
            LambdaRange::Middle
        } else {
            LambdaRange::Inner
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LambdaRange::Outside => "|λ| > N+l",
            LambdaRange::Upper => "N+l ≥ |λ| > N−l",
            LambdaRange::Middle => "N−l ≥ |λ| > N−3l",
            LambdaRange::Inner => "|λ| ≤ N−3l",
        }
    }
}

/// Smallest integer N with N > 2l/ε − 1/2.
pub fn minimal_cutoff(l: i64, epsilon: f64) -> i64 {
    let bound = 2.0 * l as f64 / epsilon - 0.5;
    let mut n = bound.floor() as i64 + 1;
    while (n as f64) <= bound {
        n += 1;
    }
    n.max(0)
}

impl FiduciaryApparatus {
    pub fn dim_h1(&self) -> usize {
        self.phi.len()
    }

    pub fn lambda_max(&self) -> i64 {
        self.n + self.l
    }

    pub fn dim_h2(&self) -> usize {
        (2 * self.lambda_max() as usize + 1) * self.block_dim
    }

    /// dim H₂,λ
    pub fn h2_lambda_dim(&self, lambda: i64) -> usize {
        if lambda.abs() <= self.lambda_max() {
            self.block_dim
        } else {
            0
        }
    }

    fn offset(&self, lambda: i64) -> Option<usize> {
        (lambda.abs() <= self.lambda_max()).then(|| (lambda + self.lambda_max()) as usize * self.block_dim)
    }

    /// Coordinates of P₂(λ)v within the block.
    pub fn block(&self, v: &StateVector, lambda: i64) -> Vec<C64> {
        match self.offset(lambda) {
            Some(o) => v.amplitudes()[o..o + self.block_dim].to_vec(),
            None => Vec::new(),
        }
    }

    pub fn l2(&self) -> Operator {
        let mut d = Vec::with_capacity(self.dim_h2());
        for lambda in -self.lambda_max()..=self.lambda_max() {
            d.extend(std::iter::repeat_n(lambda as f64, self.block_dim));
        }
        Operator::diag(&d)
    }

    /// 4l/(2N+1)
    pub fn noise_norm_sq(&self) -> f64 {
        4.0 * self.l as f64 / (2 * self.n + 1) as f64
    }

    /// Ψⁱ_γ = φ_γ ⊗ ξ and Ψᶠ_γ = φ_γ ⊗ X_γ + ψ ⊗ η_γ.
    pub fn initial_final(&self) -> (Vec<StateVector>, Vec<StateVector>) {
        let init = self.phi.iter().map(|p| p.kron(&self.xi)).collect();
        let fin = self.phi.iter().zip(&self.x).zip(&self.eta).map(|((p, x), e)| p.kron(x).add(&self.psi.kron(e))).collect();
        (init, fin)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Construct the apparatus for measuring `m` approximately under the system
/// charge `l1` with noise below `epsilon`.
pub fn build_fiduciary(m: &Operator, l1: &Operator, epsilon: f64, pol: &TolerancePolicy) -> Result<FiduciaryApparatus, WayError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(WayError::Invalid(format!("ε = {epsilon} outside (0, 1)")));
    }
    if m.dim() != l1.dim() {
        return Err(crate::numkernel::NumError::DimensionMismatch { expected: l1.dim(), found: m.dim() }.into());
    }
    let d1 = m.dim();
    let spectrum = integer_spectrum(l1, pol)?;
    let l = spectrum.iter().map(|(v, _)| v.abs()).max().unwrap_or(0);
    let zero_space = hermitian_eigendecomposition(l1, pol)?
        .clusters(1e-9)
        .into_iter()
        .find(|(v, _)| v.abs() < 1e-9)
        .ok_or_else(|| WayError::Invalid("the system charge has no zero eigenvalue".into()))?;
    let psi = zero_space.1[0].clone();

    let eig = hermitian_eigendecomposition(m, pol)?;
    let mut phi = Vec::new();
    let mut labels = Vec::new();
    let mut mu_values = Vec::new();
    for (mu, (value, vecs)) in eig.clusters(pol.eq_tol).into_iter().enumerate() {
        mu_values.push(value);
        for (k, v) in vecs.into_iter().enumerate() {
            phi.push(v);
            labels.push((mu, k));
        }
    }

    let n = minimal_cutoff(l, epsilon);
    let block_dim = 2 * d1;
    let lmax = n + l;
    let dim_h2 = (2 * lmax as usize + 1) * block_dim;
    let inv = 1.0 / (2 * n + 1) as f64;
    let amp = inv.sqrt();

    // ⟨φ_γ, P₁(λ') φ_γ'⟩
    let overlaps: Vec<(i64, Vec<Vec<C64>>)> = spectrum
        .iter()
        .map(|(lp, p)| {
            let g = (0..d1).map(|a| (0..d1).map(|b| p.sandwich(&phi[a], &phi[b]).unwrap()).collect()).collect();
            (*lp, g)
        })
        .collect();

    let offset = |lambda: i64| (lambda + lmax) as usize * block_dim;
    let mut xi = StateVector::zeros(dim_h2);
    let mut x = vec![StateVector::zeros(dim_h2); d1];
    let mut eta = vec![StateVector::zeros(dim_h2); d1];
    for lambda in -lmax..=lmax {
        let o = offset(lambda);
        if lambda.abs() <= n {
            xi[o] = C64::new(amp, 0.0);
        }
        if lambda.abs() <= n - 2 * l {
            for (g, xg) in x.iter_mut().enumerate() {
                xg[o + g] = C64::new(amp, 0.0);
            }
        }
        let gram: Vec<Vec<C64>> = match LambdaRange::classify(lambda, n, l) {
            LambdaRange::Outside | LambdaRange::Inner => continue,
            LambdaRange::Upper => (0..d1)
                .map(|a| {
                    (0..d1)
                        .map(|b| {
                            overlaps.iter().filter(|(lp, _)| (lambda - lp).abs() <= n).map(|(_, c)| c[a][b]).sum::<C64>() * inv
                        })
                        .collect()
                })
                .collect(),
            LambdaRange::Middle => (0..d1)
                .map(|a| {
                    (0..d1)
                        .map(|b| {
                            if a != b {
                                return ZERO;
                            }
                            overlaps.iter().filter(|(lp, _)| (lambda - lp).abs() > n - 2 * l).map(|(_, c)| c[a][a]).sum::<C64>() * inv
                        })
                        .collect()
                })
                .collect(),
        };
        let g = Operator::from_fn(d1, |i, j| gram[i][j]).hermitian_part();
        let ge = hermitian_eigendecomposition(&g, pol)?;
        let min_eig = ge.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -pol.eq_tol {
            return Err(WayError::GramNotPsd { lambda, min_eig });
        }
        let rank = ge.values.iter().filter(|&&v| v > pol.eq_tol).count();
        let pointer_room = if lambda.abs() <= n - 2 * l { d1 } else { 0 };
        if pointer_room + rank > block_dim {
            return Err(WayError::InsufficientMultiplicity { lambda, have: block_dim, need: pointer_room + rank });
        }
        // S = G^{1/2}; η_γλ has coordinates S[·, γ] in the noise half of the block
        let mut s = Operator::zeros(d1);
        for (val, v) in ge.values.iter().zip(&ge.vectors) {
            let r = val.max(0.0).sqrt();
            if r == 0.0 {
                continue;
            }
            for i in 0..d1 {
                for j in 0..d1 {
                    s[(i, j)] += v[i] * v[j].conj() * r;
                }
            }
        }
        for (gamma, eg) in eta.iter_mut().enumerate() {
            for row in 0..d1 {
                eg[o + d1 + row] = s[(row, gamma)];
            }
        }
    }
    Ok(FiduciaryApparatus { l, epsilon, n, m: m.clone(), l1: l1.clone(), phi, labels, mu_values, psi, block_dim, xi, x, eta })
}

/// Residual checks of the construction; every residual must stay within
/// 10·eq_tol.
pub fn verify_fiduciary(app: &FiduciaryApparatus, pol: &TolerancePolicy) -> CheckReport {
    let tol = 10.0 * pol.eq_tol;
    let mut rep = CheckReport::new();
    let d1 = app.dim_h1();
    rep.equal("cutoff N is minimal", app.n, minimal_cutoff(app.l, app.epsilon));
    rep.info("N", app.n);
    rep.info("noise norm² formula", Value::Rational(4 * app.l, 2 * app.n + 1));
    rep.residual("preparation ξ normalized", (app.xi.norm_sqr() - 1.0).abs(), tol);
    let l1psi = app.l1.apply(&app.psi).map(|v| v.norm()).unwrap_or(f64::INFINITY);
    rep.residual("system residue ψ has zero charge", l1psi, tol);
    rep.residual("system residue ψ normalized", (app.psi.norm_sqr() - 1.0).abs(), tol);

    let target_x = 1.0 - app.noise_norm_sq();
    let xnorm = app.x.iter().map(|x| (x.norm_sqr() - target_x).abs()).fold(0.0, f64::max);
    rep.residual("pointer norms equal 1 − 4l/(2N+1)", xnorm, tol);

    let mut xx = 0.0f64;
    let mut xe = 0.0f64;
    let mut ee = 0.0f64;
    for a in 0..d1 {
        for b in 0..d1 {
            if app.labels[a].0 != app.labels[b].0 {
                xx = xx.max(app.x[a].inner(&app.x[b]).norm());
            }
            xe = xe.max(app.x[a].inner(&app.eta[b]).norm());
            if a != b {
                ee = ee.max(app.eta[a].inner(&app.eta[b]).norm());
            }
        }
    }
    rep.residual("pointer states orthogonal across outcomes", xx, tol);
    rep.residual("pointer and noise states orthogonal", xe, tol);
    rep.residual("noise states mutually orthogonal", ee, tol);

    let noise: Vec<f64> = app.eta.iter().map(|e| app.psi.kron(e).norm_sqr()).collect();
    let noise_gap = noise.iter().map(|v| (v - app.noise_norm_sq()).abs()).fold(0.0, f64::max);
    rep.residual("noise norm² equals 4l/(2N+1)", noise_gap, tol);
    let worst = noise.iter().copied().fold(0.0, f64::max);
    rep.flag("noise norm² below ε", worst < app.epsilon);
    rep.info("measured noise norm²", worst);

    let mut per_range = [0.0f64; 4];
    let mut visited = [0usize; 4];
    let spectrum = integer_spectrum(&app.l1, pol).unwrap_or_default();
    let span = app.lambda_max() + app.l;
    for lambda in -span..=span {
        let r = LambdaRange::classify(lambda, app.n, app.l) as usize;
        visited[r] += 1;
        let eta_blocks: Vec<Vec<C64>> = app.eta.iter().map(|e| app.block(e, lambda)).collect();
        for a in 0..d1 {
            for b in 0..d1 {
                let mut lhs = ZERO;
                for (lp, p) in &spectrum {
                    let kappa = lambda - lp;
                    let xi_k = app.block(&app.xi, kappa);
                    let xa = app.block(&app.x[a], kappa);
                    let xb = app.block(&app.x[b], kappa);
                    let w = p.sandwich(&app.phi[a], &app.phi[b]).unwrap_or(ZERO);
                    lhs += w * (dot(&xi_k, &xi_k) - dot(&xa, &xb));
                }
                let rhs = dot(&eta_blocks[a], &eta_blocks[b]);
                per_range[r] = per_range[r].max((lhs - rhs).norm());
            }
        }
    }
    for range in LambdaRange::ALL {
        let i = range as usize;
        rep.residual(format!("inner-product preservation, {} ({} values)", range.label(), visited[i]), per_range[i], tol);
    }
    rep
}

/// The conserving unitary realizing the apparatus, with its charge.
pub fn fiduciary_unitary(app: &FiduciaryApparatus, pol: &TolerancePolicy) -> Result<(Operator, Operator), WayError> {
    let l = total_charge(&app.l1, &app.l2());
    let (init, fin) = app.initial_final();
    let u = extend_conserving_unitary(&init, &fin, &l, pol)?;
    Ok((u, l))
}

/// Build, verify and realize the apparatus in one report.
pub fn fiduciary_checks(m: &Operator, l1: &Operator, epsilon: f64, pol: &TolerancePolicy) -> Result<(FiduciaryApparatus, CheckReport), WayError> {
    let app = build_fiduciary(m, l1, epsilon, pol)?;
    let mut rep = verify_fiduciary(&app, pol);
    let (u, l) = fiduciary_unitary(&app, pol)?;
    let (init, fin) = app.initial_final();
    let map = init.iter().zip(&fin).map(|(a, b)| u.apply(a).map(|v| v.max_diff(b)).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    rep.flag("U is unitary", u.is_unitary(1e-9));
    rep.residual("‖[U, L]‖_max", super::commutator_max(&u, &l, pol), 1e-9);
    rep.residual("max ‖UΨⁱ − Ψᶠ‖", map, 1e-9);
    rep.info("apparatus dimension", app.dim_h2());
    Ok((app, rep))
}

/// Pointer observable Σ_μ μ·(projector onto span{X_μk}) on the apparatus.
pub fn pointer_observable(app: &FiduciaryApparatus) -> Operator {
    let dim = app.dim_h2();
    let mut a = Operator::zeros(dim);
    for (g, x) in app.x.iter().enumerate() {
        let nx = x.norm();
        if nx == 0.0 {
            continue;
        }
        let unit = x.scale(C64::new(1.0 / nx, 0.0));
        let p = Operator::outer(&unit, &unit).scale_re(app.mu_values[app.labels[g].0]);
        a = &a + &p;
    }
    a
}
