//! Liouville-space superoperators on column-stacked density matrices,
//! `vec(A X B) = (B^T kron A) vec(X)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lindblad::frame_energies;
use crate::system::{DensityMatrix, QuantumSystem, C64};
use crate::units::HBAR;

/// `dim^2 x dim^2` complex matrix acting on `vec(rho)`.
pub type SuperOperator = DMatrix<C64>;

/// Conditioning limit for [`liouville_ft`].
pub const CONDITION_LIMIT: f64 = 1e12;

/// Position of `rho[(a, b)]` in `vec(rho)`.
#[inline]
pub fn vec_index(a: usize, b: usize, dim: usize) -> usize {
    a + b * dim
}

pub fn vectorize(rho: &DMatrix<C64>) -> Vec<C64> {
    rho.as_slice().to_vec()
}

pub fn unvectorize(v: &[C64], dim: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(dim, dim, v)
}

/// `X -> V X`.
pub fn left(v: &DMatrix<C64>) -> SuperOperator {
    DMatrix::<C64>::identity(v.nrows(), v.nrows()).kronecker(v)
}

/// `X -> X V`.
pub fn right(v: &DMatrix<C64>) -> SuperOperator {
    v.transpose().kronecker(&DMatrix::<C64>::identity(v.nrows(), v.nrows()))
}

/// Field-free generator in the frame rotating at `carrier` (0 = lab frame),
/// assembled from Kronecker products of the jump and dephasing operators.
pub fn liouvillian(system: &QuantumSystem, carrier: f64) -> SuperOperator {
    let n = system.dim();
    let mut h = DMatrix::<C64>::zeros(n, n);
    for (m, e) in frame_energies(system, carrier).iter().enumerate() {
        h[(m, m)] = C64::new(*e, 0.0);
    }
    let mut out = (left(&h) - right(&h)) * C64::new(0.0, -1.0 / HBAR);
    let mut add = |l: DMatrix<C64>, rate: f64| {
        let ld = l.adjoint();
        let ldl = &ld * &l;
        let d = left(&l) * right(&ld) - (left(&ldl) + right(&ldl)) * C64::new(0.5, 0.0);
        out += d * C64::new(rate / HBAR, 0.0);
    };
    for j in system.jumps() {
        let mut l = DMatrix::zeros(n, n);
        l[(j.to, j.from)] = C64::new(1.0, 0.0);
        add(l, j.rate);
    }
    for d in system.dephasing() {
        let mut l = DMatrix::zeros(n, n);
        l[(d.level, d.level)] = C64::new(1.0, 0.0);
        add(l, d.strength);
    }
    out
}

/// Row vector `vec(I)^T`: the trace functional.
pub fn trace_functional(dim: usize) -> DMatrix<C64> {
    let mut t = DMatrix::zeros(1, dim * dim);
    for a in 0..dim {
        t[(0, vec_index(a, a, dim))] = C64::new(1.0, 0.0);
    }
    t
}

/// `exp(L t)`.
pub fn propagator(l: &SuperOperator, t: f64) -> SuperOperator {
    (l * C64::new(t, 0.0)).exp()
}

/// `int_0^t exp(L s) ds` from the exponential of the augmented block matrix
/// `[[L, I], [0, 0]]` (Van Loan).
pub fn integrated_propagator(l: &SuperOperator, t: f64) -> SuperOperator {
    let n = l.nrows();
    let mut big = DMatrix::<C64>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(l * C64::new(t, 0.0)));
    for i in 0..n {
        big[(i, n + i)] = C64::new(t, 0.0);
    }
    big.exp().view((0, n), (n, n)).into_owned()
}

/// Applies a superoperator to a density matrix.
pub fn apply(op: &SuperOperator, rho: &DensityMatrix) -> DMatrix<C64> {
    let n = rho.dim();
    let v = op * DMatrix::from_column_slice(n * n, 1, rho.as_slice());
    unvectorize(v.as_slice(), n)
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Inverse with a 1-norm condition estimate; fails beyond [`CONDITION_LIMIT`].
pub fn checked_inverse(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let inv = a.clone().lu().try_inverse().ok_or(Error::Singular { condition: f64::INFINITY })?;
    let condition = one_norm(a) * one_norm(&inv);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Singular { condition });
    }
    Ok(inv)
}

/// `A^{-1} (exp(A tau_f) - I)` with `A = sign * i omega / hbar + L`: the
/// finite-interval transform `int_0^tau_f exp(sign i omega s / hbar) exp(L s) ds`.
/// An infinite `tau_f` gives the resolvent limit `-A^{-1}`.
pub fn liouville_ft(l: &SuperOperator, omega: f64, tau_f: f64, sign: f64) -> Result<SuperOperator> {
    if !(tau_f >= 0.0) {
        return Err(Error::Validation(format!("transform window must be >= 0, got {tau_f}")));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::Validation(format!("sign must be +1 or -1, got {sign}")));
    }
    let n = l.nrows();
    if tau_f == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let a = l + DMatrix::<C64>::identity(n, n) * C64::new(0.0, sign * omega / HBAR);
    let inv = checked_inverse(&a)?;
    if tau_f.is_infinite() {
        return Ok(-inv);
    }
    let e = (&a * C64::new(tau_f, 0.0)).exp() - DMatrix::<C64>::identity(n, n);
    Ok(inv * e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{propagate, LindbladGenerator, NoField, DEFAULT_DT};
    use crate::system::{DephasingChannel, JumpChannel};

    fn model() -> QuantumSystem {
        QuantumSystem::dimer_model()
    }

    #[test]
    fn vectorization_identity() {
        let a = DMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        let b = DMatrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 1.0));
        let x = DMatrix::from_fn(3, 3, |i, j| C64::new(0.3 * i as f64, 0.7 * j as f64));
        let lhs = &a * &x * &b;
        let rhs = left(&a) * right(&b) * DMatrix::from_column_slice(9, 1, x.as_slice());
        assert!((DMatrix::from_column_slice(9, 1, lhs.as_slice()) - rhs).camax() < 1e-12);
    }

    #[test]
    fn generator_annihilates_trace() {
        for carrier in [0.0, 1.505] {
            let l = liouvillian(&model(), carrier);
            assert!((trace_functional(4) * &l).camax() < 1e-12);
        }
    }

    #[test]
    fn superoperator_matches_fast_generator() {
        let s = model();
        let l = liouvillian(&s, 1.505);
        let g = LindbladGenerator::new(&s, 1.505);
        for k in 0..16 {
            let mut e = vec![C64::new(0.0, 0.0); 16];
            e[k] = C64::new(1.0, 0.0);
            let mut out = vec![C64::new(0.0, 0.0); 16];
            g.apply(&e, C64::new(0.0, 0.0), &mut out);
            for (i, o) in out.iter().enumerate() {
                assert!((l[(i, k)] - o).norm() < 1e-13);
            }
        }
    }

    fn mixed_state() -> DensityMatrix {
        let mut m = DMatrix::<C64>::zeros(4, 4);
        let p = [0.1, 0.2, 0.3, 0.4];
        for a in 0..4 {
            m[(a, a)] = C64::new(p[a], 0.0);
        }
        m[(0, 1)] = C64::new(0.05, 0.02);
        m[(1, 0)] = m[(0, 1)].conj();
        m[(2, 3)] = C64::new(-0.04, 0.1);
        m[(3, 2)] = m[(2, 3)].conj();
        m[(1, 3)] = C64::new(0.02, 0.0);
        m[(3, 1)] = C64::new(0.02, 0.0);
        DensityMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn field_free_propagation_equals_matrix_exponential() {
        let s = model();
        let rho = mixed_state();
        let t = 300.0;
        let rk4 = propagate(&s, &rho, &NoField { carrier: 1.505 }, 0.0, t, DEFAULT_DT).unwrap();
        let exact = apply(&propagator(&liouvillian(&s, 1.505), t), &rho);
        assert!((rk4.matrix() - exact).camax() < 1e-9);
    }

    #[test]
    fn channels_are_additive() {
        let base = model()
            .with_jumps(vec![])
            .unwrap()
            .with_dephasing(vec![])
            .unwrap();
        let a = base.with_jumps(vec![JumpChannel { from: 2, to: 1, rate: 4.13e-3 }]).unwrap();
        let b = base
            .with_dephasing(vec![DephasingChannel { level: 1, strength: 41.3e-3 }])
            .unwrap();
        let ab = a.with_dephasing(b.dephasing().to_vec()).unwrap();
        let l0 = liouvillian(&base, 1.505);
        let combined = liouvillian(&a, 1.505) + liouvillian(&b, 1.505) - &l0;
        assert!((&combined - liouvillian(&ab, 1.505)).camax() < 1e-15);
        let rho = mixed_state();
        let exact = apply(&propagator(&combined, 200.0), &rho);
        let rk4 = propagate(&ab, &rho, &NoField { carrier: 1.505 }, 0.0, 200.0, DEFAULT_DT).unwrap();
        assert!((rk4.matrix() - exact).camax() < 1e-9);
    }

    #[test]
    fn scalar_transform_closed_form() {
        let lambda = 0.02;
        let l = DMatrix::from_element(1, 1, C64::new(-lambda, 0.0));
        for omega in [0.0, 0.01, -0.05] {
            let w = C64::new(0.0, omega / HBAR);
            let inf = liouville_ft(&l, omega, f64::INFINITY, 1.0).unwrap();
            let expect = -C64::new(1.0, 0.0) / (w - lambda);
            assert!((inf[(0, 0)] - expect).norm() < 1e-12);
            let fin = liouville_ft(&l, omega, 30.0, 1.0).unwrap();
            let expect = ((w - lambda) * 30.0).exp_m1_c() / (w - lambda);
            assert!((fin[(0, 0)] - expect).norm() < 1e-12);
        }
        assert_eq!(liouville_ft(&l, 0.3, 0.0, -1.0).unwrap()[(0, 0)], C64::new(0.0, 0.0));
        assert!(liouville_ft(&l, 0.3, -1.0, 1.0).is_err());
    }

    trait ExpM1 {
        fn exp_m1_c(self) -> C64;
    }

    impl ExpM1 for C64 {
        fn exp_m1_c(self) -> C64 {
            self.exp() - 1.0
        }
    }

    /// 5-point Gauss-Legendre on unit panels of `exp(A s)`.
    fn quadrature(l: &SuperOperator, omega: f64, tau_f: f64, sign: f64) -> SuperOperator {
        let x = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        let w = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
        let n = l.nrows();
        let panel = 0.25;
        let panels = (tau_f / panel).round() as usize;
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * panel;
            for (xi, wi) in x.iter().zip(w) {
                let s = mid + 0.5 * panel * xi;
                let phase = C64::from_polar(1.0, sign * omega * s / HBAR);
                acc += propagator(l, s) * (phase * (0.5 * panel * wi));
            }
        }
        acc
    }

    #[test]
    fn transform_matches_quadrature_on_model() {
        let s = model();
        for (carrier, omega) in [(0.0, 1.46), (0.0, 1.55), (1.505, -0.045)] {
            let l = liouvillian(&s, carrier);
            for sign in [1.0, -1.0] {
                let a = liouville_ft(&l, omega, 50.0, sign).unwrap();
                let b = quadrature(&l, omega, 50.0, sign);
                assert!((&a - &b).camax() < 1e-8, "carrier {carrier} omega {omega} sign {sign}");
            }
        }
    }

    #[test]
    fn singular_generator_is_reported() {
        // no dissipation and omega = 0: A is singular on populations
        let s = QuantumSystem::two_level(1.0);
        let l = liouvillian(&s, 1.0);
        assert!(matches!(liouville_ft(&l, 0.0, 50.0, 1.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn integrated_propagator_matches_quadrature() {
        let s = model();
        let l = liouvillian(&s, 1.505);
        let a = integrated_propagator(&l, 40.0);
        let b = quadrature(&l, 0.0, 40.0, 1.0);
        assert!((&a - &b).camax() < 1e-9);
    }
}
