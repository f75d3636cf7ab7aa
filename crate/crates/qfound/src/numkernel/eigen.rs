//! Cyclic Jacobi eigensolver for Hermitian matrices.

use super::{canonical_phase, NumError, Operator, StateVector, TolerancePolicy, C64, ZERO};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues ascending with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

impl Eigen {
    /// Σ λ_k v_k v_k†
    pub fn reconstruct(&self) -> Operator {
        let n = self.vectors.first().map(|v| v.dim()).unwrap_or(0);
        let mut m = Operator::zeros(n);
        for (lam, v) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += v[i] * v[j].conj() * *lam;
                }
            }
        }
        m
    }

    /// Group eigenvalues that agree within `tol` into (value, vectors) clusters.
    pub fn clusters(&self, tol: f64) -> Vec<(f64, Vec<StateVector>)> {
        let mut out: Vec<(f64, Vec<StateVector>)> = Vec::new();
        let mut start = 0;
        for k in 0..self.values.len() {
            if k + 1 == self.values.len() || self.values[k + 1] - self.values[k] > tol {
                let vals = &self.values[start..=k];
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                out.push((mean, self.vectors[start..=k].to_vec()));
                start = k + 1;
            }
        }
        out
    }
}

/// Unitary 2×2 rotation (as its four entries G_pp, G_pq, G_qp, G_qq) that
/// diagonalizes [[app, apq], [conj apq, aqq]] by G† A G.
pub(crate) fn jacobi_rotation(app: f64, aqq: f64, apq: C64) -> (C64, C64, C64, C64) {
    let rmag = apq.norm();
    let phase = apq / rmag; // e^{iφ}
    let theta = (aqq - app) / (2.0 * rmag);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let cs = 1.0 / (t * t + 1.0).sqrt();
    let sn = t * cs;
    let em = phase.conj();
    (C64::new(cs, 0.0), C64::new(sn, 0.0), -em * sn, em * cs)
}

/// Eigendecomposition of a Hermitian operator by cyclic Jacobi rotations.
///
/// Eigenvalues come back ascending. Each eigenvector is phase-fixed so its
/// first component above the rank threshold is real and nonnegative.
pub fn hermitian_eigendecomposition(a: &Operator, pol: &TolerancePolicy) -> Result<Eigen, NumError> {
    let dev = a.hermitian_deviation();
    if dev > pol.eq_tol {
        return Err(NumError::NotHermitian { max_dev: dev });
    }
    let n = a.dim();
    let mut m = a.hermitian_part();
    let mut v = Operator::identity(n);
    let frob = m.frobenius();
    let target = (n as f64) * f64::EPSILON * frob.max(f64::MIN_POSITIVE);

    let off = |m: &Operator| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(NumError::ConvergenceFailure { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= f64::MIN_POSITIVE {
                    continue;
                }
                let (gpp, gpq, gqp, gqq) = jacobi_rotation(m[(p, p)].re, m[(q, q)].re, apq);
                for k in 0..n {
                    let (x, y) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = x * gpp + y * gqp;
                    m[(k, q)] = x * gpq + y * gqq;
                }
                for k in 0..n {
                    let (x, y) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = gpp.conj() * x + gqp.conj() * y;
                    m[(q, k)] = gpq.conj() * x + gqq.conj() * y;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = x * gpp + y * gqp;
                    v[(k, q)] = x * gpq + y * gqq;
                }
            }
        }
        converged = off(&m) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap().then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = order.iter().map(|&i| canonical_phase(v.column(i), pol.rank_tol_factor)).collect();
    Ok(Eigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::super::random::*;
    use super::*;

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eigendecomposition(&Operator::identity(3), &TolerancePolicy::default()).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn pauli_x_eigenpairs() {
        let e = hermitian_eigendecomposition(&Operator::pauli_x(), &TolerancePolicy::default()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(e.vectors[0].max_diff(&StateVector::from_real(&[s, -s])) < 1e-14);
        assert!(e.vectors[1].max_diff(&StateVector::from_real(&[s, s])) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = Operator::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            hermitian_eigendecomposition(&a, &TolerancePolicy::default()),
            Err(NumError::NotHermitian { .. })
        ));
    }

    #[test]
    fn random_reconstruction() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(3);
        for n in 2..=16 {
            let a = random_hermitian(&mut rng, n);
            let e = hermitian_eigendecomposition(&a, &pol).unwrap();
            assert!(e.reconstruct().max_diff(&a) <= 1e-10 * (1.0 + a.max_abs()));
            for w in e.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
            for (lam, v) in e.values.iter().zip(&e.vectors) {
                let av = a.apply(v).unwrap();
                assert!(av.max_diff(&v.scale(C64::new(*lam, 0.0))) <= 10.0 * pol.eq_tol);
                let first = v.amplitudes().iter().find(|z| z.norm() > pol.rank_tol_factor).unwrap();
                assert!(first.im.abs() < 1e-14 && first.re >= 0.0);
            }
        }
    }

    #[test]
    fn degenerate_spectrum_clusters() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(8);
        let u = random_unitary(&mut rng, 4);
        let a = &(&u * &Operator::diag(&[1.0, 1.0, 2.0, 3.0])) * &u.adjoint();
        let e = hermitian_eigendecomposition(&a, &pol).unwrap();
        let cl = e.clusters(1e-9);
        assert_eq!(cl.len(), 3);
        assert_eq!(cl[0].1.len(), 2);
    }
}
