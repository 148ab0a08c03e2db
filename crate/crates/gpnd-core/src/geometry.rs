//! Local linearization of the decoder: numerical Jacobian, thin SVD, and the
//! change to tangent/orthogonal coordinates.
//!
//! The thin SVD runs on the small `n x n` Gram matrix of the Jacobian, so the
//! `m x (m - n)` orthogonal complement is never materialized; the residual
//! norm uses the identity `|w_perp|^2 = |d|^2 - |U' d|^2`.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, norm, Mat};
use crate::nn::DenseNetwork;

/// Default central-difference step; second-order accurate at `f64`
/// precision for sigmoid-bounded decoders.
pub const DEFAULT_JACOBIAN_STEP: f64 = 1e-4;

/// Singular values below `RANK_TOLERANCE * s_max` flag the decomposition as
/// degenerate and are floored at that bound, so rank-deficient samples still
/// receive a finite score.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Thin SVD of a decoder Jacobian: `J = U S V'` with `U` of orthonormal
/// columns spanning the tangent space, `S` descending, `V` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    pub u_par: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
    /// True when a singular value fell below the rank tolerance (values in
    /// `s` are already floored).
    pub degenerate: bool,
}

/// Thin SVD anchored at a test point: the linearization of the decoder at
/// `z_bar` with its reconstruction `x_par = f(z_bar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDecomposition {
    pub svd: ThinSvd,
    pub z_bar: Vec<f64>,
    pub x_par: Vec<f64>,
}

impl TangentDecomposition {
    pub fn new(svd: ThinSvd, z_bar: Vec<f64>, x_par: Vec<f64>) -> Result<Self> {
        if z_bar.len() != svd.u_par.cols() {
            return Err(Error::DimensionMismatch {
                expected: svd.u_par.cols(),
                got: z_bar.len(),
            });
        }
        if x_par.len() != svd.u_par.rows() {
            return Err(Error::DimensionMismatch {
                expected: svd.u_par.rows(),
                got: x_par.len(),
            });
        }
        Ok(Self { svd, z_bar, x_par })
    }

    pub fn ambient_dim(&self) -> usize {
        self.svd.u_par.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.svd.u_par.cols()
    }
}

/// Coordinates of a sample relative to a tangent decomposition: the
/// projection of the reconstruction onto the tangent space, and the norm of
/// the component of `x - x_par` orthogonal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCoordinates {
    pub w_par: Vec<f64>,
    pub w_perp_norm: f64,
}

/// Central-difference Jacobian of `decoder` at `z`: column `j` is
/// `(f(z + h e_j) - f(z - h e_j)) / (2 h)`.
pub fn numerical_jacobian<F>(mut decoder: F, z: &[f64], h: f64) -> Result<Mat>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument("jacobian step must be positive"));
    }
    if !all_finite(z) {
        return Err(Error::NonFinite {
            context: "jacobian expansion point",
        });
    }
    let n = z.len();
    let mut point = z.to_vec();
    let mut jac: Option<Mat> = None;
    for j in 0..n {
        point[j] = z[j] + h;
        let plus = decoder(&point)?;
        point[j] = z[j] - h;
        let minus = decoder(&point)?;
        point[j] = z[j];
        if plus.len() != minus.len() {
            return Err(Error::DimensionMismatch {
                expected: plus.len(),
                got: minus.len(),
            });
        }
        let m = plus.len();
        let jac = jac.get_or_insert_with(|| Mat::zeros(m, n));
        if jac.rows() != m {
            return Err(Error::DimensionMismatch {
                expected: jac.rows(),
                got: m,
            });
        }
        for i in 0..m {
            let d = (plus[i] - minus[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    context: "decoder output in jacobian",
                });
            }
            *jac.at_mut(i, j) = d;
        }
    }
    jac.ok_or(Error::InvalidArgument("jacobian needs >= 1 latent dimension"))
}

/// Central-difference Jacobian of a dense network, evaluated through one
/// batched forward over all `2n` perturbed points. Bitwise identical to
/// [`numerical_jacobian`] over the network's inference map; the batch only
/// improves weight reuse on wide decoders.
pub fn network_jacobian(net: &DenseNetwork, z: &[f64], h: f64) -> Result<Mat> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument("jacobian step must be positive"));
    }
    if !all_finite(z) {
        return Err(Error::NonFinite {
            context: "jacobian expansion point",
        });
    }
    let n = z.len();
    if n == 0 {
        return Err(Error::InvalidArgument("jacobian needs >= 1 latent dimension"));
    }
    let mut points = Mat::zeros(2 * n, n);
    for j in 0..n {
        points.row_mut(2 * j).copy_from_slice(z);
        *points.at_mut(2 * j, j) = z[j] + h;
        points.row_mut(2 * j + 1).copy_from_slice(z);
        *points.at_mut(2 * j + 1, j) = z[j] - h;
    }
    let outputs = net.infer_batch(&points)?;
    let m = outputs.cols();
    let mut jac = Mat::zeros(m, n);
    for j in 0..n {
        let plus = outputs.row(2 * j);
        let minus = outputs.row(2 * j + 1);
        for i in 0..m {
            let d = (plus[i] - minus[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    context: "decoder output in jacobian",
                });
            }
            *jac.at_mut(i, j) = d;
        }
    }
    Ok(jac)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns unsorted eigenvalues and the eigenvector matrix (columns).
fn jacobi_eigen_symmetric(mut a: Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    let mut v = Mat::identity(n);
    if n == 1 {
        return (vec![a.at(0, 0)], v);
    }
    let scale = a.frobenius();
    let tol = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.at(p, q) * a.at(p, q);
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a.at(p, q);
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.at(k, p);
                    let akq = a.at(k, q);
                    *a.at_mut(k, p) = c * akp - s * akq;
                    *a.at_mut(k, q) = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a.at(p, k);
                    let aqk = a.at(q, k);
                    *a.at_mut(p, k) = c * apk - s * aqk;
                    *a.at_mut(q, k) = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    *v.at_mut(k, p) = c * vkp - s * vkq;
                    *v.at_mut(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a.at(i, i)).collect(), v)
}

/// Thin SVD of `J` (`m >= n`, full rank assumed) via the symmetric
/// eigenproblem of `J' J`. Near-zero singular values are floored at the rank
/// tolerance and flagged. Each `V` column's first entry larger than 1e-12 in
/// magnitude is made positive, which fixes all signs deterministically.
pub fn thin_svd(j: &Mat) -> Result<ThinSvd> {
    let (m, n) = (j.rows(), j.cols());
    if m < n || n == 0 {
        return Err(Error::InvalidArgument("thin SVD needs m >= n >= 1"));
    }
    if !all_finite(j.data()) {
        return Err(Error::NonFinite {
            context: "jacobian entries",
        });
    }
    let (eigvals, eigvecs) = jacobi_eigen_symmetric(j.gram());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigvals[b].total_cmp(&eigvals[a]));
    let mut s: Vec<f64> = order.iter().map(|&i| eigvals[i].max(0.0).sqrt()).collect();
    let mut v = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            *v.at_mut(r, new_col) = eigvecs.at(r, old_col);
        }
    }
    let s_max = s[0];
    let floor = if s_max > 0.0 {
        RANK_TOLERANCE * s_max
    } else {
        RANK_TOLERANCE
    };
    let mut degenerate = false;
    for si in s.iter_mut() {
        if *si < floor {
            *si = floor;
            degenerate = true;
        }
    }
    // U columns from J V S^-1, then one modified Gram-Schmidt pass to clean
    // up near-parallel columns in clustered or floored cases.
    let mut u = Mat::zeros(m, n);
    for c in 0..n {
        let jv = j.matvec(&v.col(c));
        for r in 0..m {
            *u.at_mut(r, c) = jv[r] / s[c];
        }
    }
    for c in 0..n {
        let mut col = u.col(c);
        for prev in 0..c {
            let proj = (0..m).map(|r| u.at(r, prev) * col[r]).sum::<f64>();
            for r in 0..m {
                col[r] -= proj * u.at(r, prev);
            }
        }
        let len = norm(&col);
        if len > 1e-8 {
            for r in 0..m {
                *u.at_mut(r, c) = col[r] / len;
            }
        } else {
            // Rank-deficient direction: complete deterministically from the
            // standard basis.
            degenerate = true;
            let mut placed = false;
            for k in 0..m {
                let mut cand = vec![0.0; m];
                cand[k] = 1.0;
                for prev in 0..c {
                    let proj = u.at(k, prev);
                    for r in 0..m {
                        cand[r] -= proj * u.at(r, prev);
                    }
                }
                let len = norm(&cand);
                if len > 0.5 {
                    for r in 0..m {
                        *u.at_mut(r, c) = cand[r] / len;
                    }
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::NonFinite {
                    context: "orthonormal completion",
                });
            }
        }
    }
    for c in 0..n {
        let lead = (0..n).map(|r| v.at(r, c)).find(|e| e.abs() > 1e-12);
        if let Some(e) = lead {
            if e < 0.0 {
                for r in 0..n {
                    *v.at_mut(r, c) = -v.at(r, c);
                }
                for r in 0..m {
                    *u.at_mut(r, c) = -u.at(r, c);
                }
            }
        }
    }
    Ok(ThinSvd {
        u_par: u,
        s,
        v,
        degenerate,
    })
}

/// Tangent/orthogonal coordinates of `x` relative to the decomposition:
/// `w_par = U' x_par` (the projection of the reconstruction) and
/// `|w_perp| = sqrt(max(0, |d|^2 - |U' d|^2))` for `d = x - x_par`.
pub fn local_coordinates(x: &[f64], dec: &TangentDecomposition) -> Result<LocalCoordinates> {
    let m = dec.ambient_dim();
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let w_par = dec.svd.u_par.tmatvec(&dec.x_par);
    let d: Vec<f64> = x.iter().zip(&dec.x_par).map(|(&a, &b)| a - b).collect();
    let t = dec.svd.u_par.tmatvec(&d);
    let w_perp_sq = dot(&d, &d) - dot(&t, &t);
    Ok(LocalCoordinates {
        w_par,
        w_perp_norm: w_perp_sq.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    fn random_mat(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    /// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric
    /// solution of the characteristic cubic); independent of the Jacobi
    /// iteration under test.
    fn symmetric_3x3_eigenvalues(a: &Mat) -> [f64; 3] {
        let p1 = a.at(0, 1).powi(2) + a.at(0, 2).powi(2) + a.at(1, 2).powi(2);
        if p1 == 0.0 {
            let mut eig = [a.at(0, 0), a.at(1, 1), a.at(2, 2)];
            eig.sort_by(|x, y| y.total_cmp(x));
            return eig;
        }
        let q = (a.at(0, 0) + a.at(1, 1) + a.at(2, 2)) / 3.0;
        let p2 = (a.at(0, 0) - q).powi(2)
            + (a.at(1, 1) - q).powi(2)
            + (a.at(2, 2) - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let det_b = {
            let b = |i: usize, j: usize| (a.at(i, j) - if i == j { q } else { 0.0 }) / p;
            b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
                - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
                + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0))
        };
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * core::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut eig = [e1, e2, e3];
        eig.sort_by(|x, y| y.total_cmp(x));
        eig
    }

    /// Completes `u` (orthonormal columns) to a full basis by Gram-Schmidt
    /// over the standard basis and returns the orthogonal complement
    /// columns; the test-side oracle for the residual-norm identity.
    fn complete_basis(u: &Mat) -> Mat {
        let (m, n) = (u.rows(), u.cols());
        let mut cols: Vec<Vec<f64>> = (0..n).map(|c| u.col(c)).collect();
        let mut extra: Vec<Vec<f64>> = Vec::new();
        for k in 0..m {
            if cols.len() == m {
                break;
            }
            let mut cand = vec![0.0; m];
            cand[k] = 1.0;
            for c in &cols {
                let proj = dot(c, &cand);
                for (x, &ci) in cand.iter_mut().zip(c) {
                    *x -= proj * ci;
                }
            }
            let len = norm(&cand);
            if len > 1e-6 {
                for x in cand.iter_mut() {
                    *x /= len;
                }
                cols.push(cand.clone());
                extra.push(cand);
            }
        }
        assert_eq!(cols.len(), m, "basis completion failed");
        let mut out = Mat::zeros(m, m - n);
        for (c, col) in extra.iter().enumerate() {
            for r in 0..m {
                *out.at_mut(r, c) = col[r];
            }
        }
        out
    }

    #[test]
    fn network_jacobian_is_bitwise_identical_to_the_generic_path() {
        use crate::nn::{Activation, LayerSpec};
        let all = [
            Activation::Relu,
            Activation::LeakyRelu,
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Identity,
        ];
        let mut rng = Seed(0x7a).rng();
        for case in 0u64..40 {
            let layers = rng.random_range(1..=3usize);
            let mut widths = vec![rng.random_range(1..=6usize)];
            for _ in 0..layers {
                widths.push(rng.random_range(1..=24usize));
            }
            let specs: Vec<LayerSpec> = (0..layers)
                .map(|k| {
                    LayerSpec::new(
                        widths[k],
                        widths[k + 1],
                        all[rng.random_range(0..all.len())],
                    )
                })
                .collect();
            let net = DenseNetwork::init(&specs, Seed(case)).unwrap();
            let z: Vec<f64> = (0..widths[0])
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect();
            let h = DEFAULT_JACOBIAN_STEP;
            let batched = network_jacobian(&net, &z, h).unwrap();
            let generic = numerical_jacobian(|p| net.infer(p), &z, h).unwrap();
            assert_eq!(batched, generic, "case {case}");
        }
    }

    #[test]
    fn network_jacobian_rejects_bad_steps_and_points() {
        use crate::nn::{Activation, LayerSpec};
        let net =
            DenseNetwork::init(&[LayerSpec::new(2, 3, Activation::Tanh)], Seed(1)).unwrap();
        assert!(network_jacobian(&net, &[0.1, 0.2], 0.0).is_err());
        assert!(network_jacobian(&net, &[0.1, 0.2], f64::INFINITY).is_err());
        assert!(network_jacobian(&net, &[f64::NAN, 0.2], 1e-4).is_err());
        assert!(network_jacobian(&net, &[], 1e-4).is_err());
        assert!(network_jacobian(&net, &[0.1, 0.2, 0.3], 1e-4).is_err());
    }

    #[test]
    fn jacobian_exact_on_linear_decoder() {
        let a = Mat::from_vec(3, 2, vec![1.0, -2.0, 0.5, 3.0, -1.5, 0.25]).unwrap();
        let f = |z: &[f64]| Ok(a.matvec(z));
        let j = numerical_jacobian(f, &[0.3, -0.7], 1e-4).unwrap();
        for r in 0..3 {
            for c in 0..2 {
                assert!((j.at(r, c) - a.at(r, c)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn jacobian_exact_on_quadratic() {
        let f = |z: &[f64]| Ok(vec![z[0] * z[0], z[0]]);
        let j = numerical_jacobian(f, &[1.0], 1e-3).unwrap();
        assert!((j.at(0, 0) - 2.0).abs() < 1e-11);
        assert!((j.at(1, 0) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn jacobian_matches_analytic_trig_derivative() {
        let f = |z: &[f64]| Ok(vec![z[0].sin(), z[0].cos()]);
        let j = numerical_jacobian(f, &[0.7], 1e-5).unwrap();
        assert!((j.at(0, 0) - 0.7f64.cos()).abs() < 1e-8);
        assert!((j.at(1, 0) + 0.7f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn jacobian_rejects_bad_step_and_nonfinite() {
        let f = |z: &[f64]| Ok(vec![z[0]]);
        assert!(numerical_jacobian(f, &[0.0], 0.0).is_err());
        let g = |_: &[f64]| Ok(vec![f64::NAN]);
        assert!(numerical_jacobian(g, &[0.0], 1e-4).is_err());
    }

    #[test]
    fn thin_svd_diagonal_case() {
        let j = Mat::from_vec(3, 2, vec![3.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let svd = thin_svd(&j).unwrap();
        assert!((svd.s[0] - 3.0).abs() < 1e-12);
        assert!((svd.s[1] - 2.0).abs() < 1e-12);
        assert!(!svd.degenerate);
        for r in 0..3 {
            for c in 0..2 {
                let expect_u = if r == c { 1.0 } else { 0.0 };
                assert!((svd.u_par.at(r, c) - expect_u).abs() < 1e-12);
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                let expect_v = if r == c { 1.0 } else { 0.0 };
                assert!((svd.v.at(r, c) - expect_v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn thin_svd_isometry_has_unit_singular_values() {
        // Orthonormal columns built by rotating the first two identity
        // columns of a 4-dim rotation.
        let c = 0.6f64;
        let s = 0.8f64;
        let j = Mat::from_vec(
            4,
            2,
            vec![c, 0.0, 0.0, c, s, 0.0, 0.0, s],
        )
        .unwrap();
        let svd = thin_svd(&j).unwrap();
        for &si in &svd.s {
            assert!((si - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_svd_matches_closed_form_gram_eigenvalues() {
        let mut rng = Seed(31).rng();
        for _ in 0..50 {
            let j = random_mat(6, 3, &mut rng);
            let svd = thin_svd(&j).unwrap();
            let eig = symmetric_3x3_eigenvalues(&j.gram());
            for (si, ei) in svd.s.iter().zip(eig) {
                assert!(
                    (si * si - ei).abs() < 1e-8 * eig[0].max(1.0),
                    "s^2 = {}, eig = {}",
                    si * si,
                    ei
                );
            }
        }
    }

    #[test]
    fn thin_svd_invariants_on_random_matrices() {
        let mut rng = Seed(32).rng();
        for round in 0..1000 {
            let m = 2 + (rng.random::<u64>() % 127) as usize;
            let n = 1 + (rng.random::<u64>() % 32.min(m as u64)) as usize;
            let j = random_mat(m, n, &mut rng);
            let svd = thin_svd(&j).unwrap();
            // Orthonormal columns.
            for a in 0..n {
                for b in a..n {
                    let prod = dot(&svd.u_par.col(a), &svd.u_par.col(b));
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (prod - expect).abs() < 1e-8,
                        "round {round}: U'U[{a},{b}] = {prod}"
                    );
                }
            }
            // Descending non-negative spectrum.
            for w in svd.s.windows(2) {
                assert!(w[0] >= w[1] && w[1] >= 0.0);
            }
            // Reconstruction in relative Frobenius norm.
            let mut err = 0.0;
            for r in 0..m {
                for c in 0..n {
                    let mut rec = 0.0;
                    for k in 0..n {
                        rec += svd.u_par.at(r, k) * svd.s[k] * svd.v.at(c, k);
                    }
                    let d = rec - j.at(r, c);
                    err += d * d;
                }
            }
            let rel = err.sqrt() / j.frobenius().max(1e-300);
            assert!(rel < 1e-6, "round {round}: reconstruction error {rel}");
        }
    }

    #[test]
    fn thin_svd_flags_rank_deficiency_and_floors() {
        let j = Mat::from_vec(3, 2, vec![1.0, 0.0, 2.0, 0.0, -1.0, 0.0]).unwrap();
        let svd = thin_svd(&j).unwrap();
        assert!(svd.degenerate);
        let s_max = svd.s[0];
        assert!(svd.s[1] >= RANK_TOLERANCE * s_max * 0.999);
        // Columns stay orthonormal even for the completed direction.
        let prod = dot(&svd.u_par.col(0), &svd.u_par.col(1));
        assert!(prod.abs() < 1e-10);
        assert!((norm(&svd.u_par.col(1)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn local_coordinates_axis_aligned() {
        let svd = ThinSvd {
            u_par: Mat::from_vec(2, 1, vec![1.0, 0.0]).unwrap(),
            s: vec![1.0],
            v: Mat::identity(1),
            degenerate: false,
        };
        let dec = TangentDecomposition::new(svd, vec![0.0], vec![3.0, 0.0]).unwrap();
        let lc = local_coordinates(&[3.0, 4.0], &dec).unwrap();
        assert_eq!(lc.w_par, vec![3.0]);
        assert!((lc.w_perp_norm - 4.0).abs() < 1e-12);
    }

    #[test]
    fn local_coordinates_in_plane_residual_is_zero() {
        let mut rng = Seed(33).rng();
        let j = random_mat(5, 2, &mut rng);
        let svd = thin_svd(&j).unwrap();
        let x_par = vec![0.1, -0.2, 0.05, 0.3, 0.0];
        // Move within the tangent plane only.
        let shift: Vec<f64> = {
            let u = &svd.u_par;
            (0..5).map(|r| 0.7 * u.at(r, 0) - 0.4 * u.at(r, 1)).collect()
        };
        let x: Vec<f64> = x_par.iter().zip(&shift).map(|(&a, &b)| a + b).collect();
        let dec = TangentDecomposition::new(svd, vec![0.0, 0.0], x_par).unwrap();
        // The norm identity cancels two nearly equal quantities, so exact
        // in-plane points resolve to sqrt(machine epsilon) at best.
        let lc = local_coordinates(&x, &dec).unwrap();
        assert!(lc.w_perp_norm < 1e-7, "w_perp = {}", lc.w_perp_norm);
    }

    #[test]
    fn local_coordinates_matches_materialized_complement() {
        let mut rng = Seed(34).rng();
        for _ in 0..50 {
            let j = random_mat(5, 2, &mut rng);
            let svd = thin_svd(&j).unwrap();
            let u_perp = complete_basis(&svd.u_par);
            let x_par: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0).collect();
            let dec = TangentDecomposition::new(svd, vec![0.0, 0.0], x_par.clone()).unwrap();
            let lc = local_coordinates(&x, &dec).unwrap();
            let d: Vec<f64> = x.iter().zip(&x_par).map(|(&a, &b)| a - b).collect();
            let oracle = norm(&u_perp.tmatvec(&d));
            assert!(
                (lc.w_perp_norm - oracle).abs() < 1e-10,
                "identity {} vs oracle {}",
                lc.w_perp_norm,
                oracle
            );
        }
    }

    #[test]
    fn residual_decomposition_satisfies_pythagoras() {
        let mut rng = Seed(35).rng();
        for _ in 0..200 {
            let m = 3 + (rng.random::<u64>() % 12) as usize;
            let n = 1 + (rng.random::<u64>() % (m as u64 - 1).min(4)) as usize;
            let j = random_mat(m, n, &mut rng);
            let svd = thin_svd(&j).unwrap();
            let x_par: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect();
            let d: Vec<f64> = x.iter().zip(&x_par).map(|(&a, &b)| a - b).collect();
            let t = svd.u_par.tmatvec(&d);
            let dec = TangentDecomposition::new(svd, vec![0.0; n], x_par).unwrap();
            let lc = local_coordinates(&x, &dec).unwrap();
            let lhs = dot(&t, &t) + lc.w_perp_norm * lc.w_perp_norm;
            let rhs = dot(&d, &d);
            assert!((lhs - rhs).abs() <= 1e-6 * rhs.max(1e-12));
        }
    }

    #[test]
    fn linear_decoder_pipeline_is_exact() {
        // Jacobian -> SVD -> coordinates on an affine decoder: the tangent
        // space equals the column space of A, so projecting A onto it is
        // lossless and in-plane points have zero residual.
        let mut rng = Seed(36).rng();
        let a = random_mat(7, 3, &mut rng);
        let c: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        let f = |z: &[f64]| {
            let mut y = a.matvec(z);
            for (yi, &ci) in y.iter_mut().zip(&c) {
                *yi += ci;
            }
            Ok(y)
        };
        let z_bar = vec![0.2, -0.4, 0.9];
        let j = numerical_jacobian(f, &z_bar, 1e-4).unwrap();
        let svd = thin_svd(&j).unwrap();
        for col in 0..3 {
            let acol = a.col(col);
            let proj = svd.u_par.tmatvec(&acol);
            let mut back = vec![0.0; 7];
            for r in 0..7 {
                for k in 0..3 {
                    back[r] += svd.u_par.at(r, k) * proj[k];
                }
            }
            let resid: f64 = acol
                .iter()
                .zip(&back)
                .map(|(&x, &y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-8, "column {col} residual {resid}");
        }
    }
}
