//! Finite-difference symplecticity test for one leapfrog step.
//!
//! Phase space is the tangent bundle `{(θ, r) : θᵀθ = I, θᵀr skew}` with the
//! two-form inherited from the ambient `(θ, r)` coordinates:
//!
//! ```text
//! ω(δ₁, δ₂) = ⟨δ₁r, δ₂θ⟩ − ⟨δ₂r, δ₁θ⟩.
//! ```
//!
//! Input and output tangent spaces each get a Darboux basis (`ω = A` in
//! coordinates). The step's derivative is taken by central differences along
//! curves that stay on the bundle, read back in the output basis, and the
//! residual `‖JᵀAJ − A‖_F` is reported.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::sym;
use crate::manifold::{euclidean_projection, TangentVector};
use crate::samplers::{leapfrog_step, Drift, ParamGroup};
use crate::target::{GroupKind, TargetModel};
use crate::targets::polar_map;

/// Largest allowed disagreement between the Jacobians at `h` and `h/2`.
pub const RESOLUTION_TOL: f64 = 1e-6;

type Pair = (DMatrix<f64>, DMatrix<f64>);

/// Frobenius-orthonormal basis of `T_X` built from `Z = XA + X⊥B`, `A` skew.
pub fn tangent_basis(x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (n, p) = x.shape();
    let mut basis = Vec::with_capacity(n * p - p * (p + 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            let mut a = DMatrix::zeros(p, p);
            a[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
            a[(j, i)] = -std::f64::consts::FRAC_1_SQRT_2;
            basis.push(x * a);
        }
    }
    let complement = orthogonal_complement(x);
    for i in 0..(n - p) {
        for j in 0..p {
            let mut z = DMatrix::zeros(n, p);
            z.set_column(j, &complement.column(i));
            basis.push(z);
        }
    }
    basis
}

fn orthogonal_complement(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut cols: Vec<nalgebra::DVector<f64>> = (0..p).map(|j| x.column(j).into_owned()).collect();
    for k in 0..n {
        let mut v = nalgebra::DVector::zeros(n);
        v[k] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
        if cols.len() == n {
            break;
        }
    }
    if cols.len() == p {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols[p..])
}

fn omega(a: &Pair, b: &Pair) -> f64 {
    a.1.dot(&b.0) - b.1.dot(&a.0)
}

fn combine(a: &Pair, ca: f64, b: &Pair, cb: f64) -> Pair {
    (&a.0 * ca + &b.0 * cb, &a.1 * ca + &b.1 * cb)
}

/// Basis of the bundle's tangent space at `(θ, r)`: `(E, −θ sym(Eᵀr))` for
/// each `E` in [`tangent_basis`], then `(0, F)`.
fn bundle_basis(theta: &DMatrix<f64>, r: &DMatrix<f64>) -> Vec<Pair> {
    let t = tangent_basis(theta);
    let zero = DMatrix::zeros(theta.nrows(), theta.ncols());
    let mut out: Vec<Pair> = t
        .iter()
        .map(|e| (e.clone(), -(theta * sym(&e.tr_mul(r)))))
        .collect();
    out.extend(t.into_iter().map(|f| (zero.clone(), f)));
    out
}

/// Symplectic Gram–Schmidt; returns `(e₁…e_d, f₁…f_d)` with
/// `ω(e_i, f_j) = δ_ij` and all other pairings zero.
fn darboux(theta: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Vec<Pair>> {
    let mut rest = bundle_basis(theta, r);
    let d = rest.len() / 2;
    let mut es = Vec::with_capacity(d);
    let mut fs = Vec::with_capacity(d);
    while !rest.is_empty() {
        let e = rest.remove(0);
        let (k, w) = rest
            .iter()
            .enumerate()
            .map(|(k, v)| (k, omega(&e, v)))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .ok_or_else(|| Error::NumericStability("odd-dimensional phase space".into()))?;
        if w.abs() < 1e-10 {
            return Err(Error::NumericStability(format!(
                "two-form is degenerate (pivot {w:.3e})"
            )));
        }
        let f = rest.remove(k);
        let f = (&f.0 / w, &f.1 / w);
        for v in rest.iter_mut() {
            let wf = omega(v, &f);
            let we = omega(v, &e);
            let t = combine(v, 1.0, &e, -wf);
            *v = combine(&t, 1.0, &f, we);
        }
        es.push(e);
        fs.push(f);
    }
    es.extend(fs);
    Ok(es)
}

fn canonical_a(d: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        a[(i, d + i)] = 1.0;
        a[(d + i, i)] = -1.0;
    }
    a
}

struct StepMap<'a, T: ?Sized> {
    target: &'a T,
    eps: f64,
    drift: Drift,
}

impl<T: TargetModel + ?Sized> StepMap<'_, T> {
    fn apply(&self, theta: DMatrix<f64>, r: DMatrix<f64>) -> Result<Pair> {
        let g = ParamGroup {
            kind: GroupKind::Stiefel,
            value: theta,
            momentum: r,
        };
        let mut out = leapfrog_step(self.target, &[g], self.eps, self.drift)?;
        let g = out.pop().expect("one group");
        Ok((g.value, g.momentum))
    }

    /// Point on a bundle curve through `(θ, r)` with velocity `v` at `t = 0`.
    fn curve(theta: &DMatrix<f64>, r: &DMatrix<f64>, v: &Pair, t: f64) -> Result<Pair> {
        let th = polar_map(&(theta + &v.0 * t))?;
        let rr = euclidean_projection(&th, &(r + &v.1 * t));
        Ok((th, rr))
    }

    fn jacobian(&self, theta: &DMatrix<f64>, r: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
        let inputs = darboux(theta, r)?;
        let (theta1, r1) = self.apply(theta.clone(), r.clone())?;
        let outputs = darboux(&theta1, &r1)?;
        let dim = inputs.len();
        let d = dim / 2;
        let mut j = DMatrix::zeros(dim, dim);
        for (col, v) in inputs.iter().enumerate() {
            let (tp, rp) = Self::curve(theta, r, v, h)?;
            let (tm, rm) = Self::curve(theta, r, v, -h)?;
            let plus = self.apply(tp, rp)?;
            let minus = self.apply(tm, rm)?;
            let w = (
                (plus.0 - minus.0) / (2.0 * h),
                (plus.1 - minus.1) / (2.0 * h),
            );
            // w = Σ c_k u_k  ⇒  ω(u_k, w) = (A c)_k  ⇒  c = Aᵀ s
            let s: Vec<f64> = outputs.iter().map(|u| omega(u, &w)).collect();
            for i in 0..d {
                j[(i, col)] = -s[d + i];
                j[(d + i, col)] = s[i];
            }
        }
        Ok(j)
    }
}

fn residual(j: &DMatrix<f64>) -> f64 {
    let a = canonical_a(j.nrows() / 2);
    (j.transpose() * &a * j - a).norm()
}

fn single_stiefel<T: TargetModel + ?Sized>(target: &T) -> Result<()> {
    let specs = target.groups();
    if specs.len() != 1 || specs[0].kind != GroupKind::Stiefel {
        return Err(Error::Contract(
            "symplecticity check needs a target with exactly one Stiefel group".into(),
        ));
    }
    Ok(())
}

/// Central-difference Jacobian of one leapfrog step in Darboux coordinates
/// (input basis at `state`, output basis at its image).
pub fn step_jacobian<T: TargetModel + ?Sized>(
    target: &T,
    state: &TangentVector,
    eps: f64,
    fd_step: f64,
    drift: Drift,
) -> Result<DMatrix<f64>> {
    single_stiefel(target)?;
    let map = StepMap { target, eps, drift };
    map.jacobian(state.base().as_matrix(), state.as_matrix(), fd_step)
}

/// `‖JᵀAJ − A‖_F` from a single central-difference Jacobian at step `fd_step`,
/// without the resolution check.
pub fn symplectic_residual_at<T: TargetModel + ?Sized>(
    target: &T,
    state: &TangentVector,
    eps: f64,
    fd_step: f64,
    drift: Drift,
) -> Result<f64> {
    single_stiefel(target)?;
    let map = StepMap { target, eps, drift };
    let j = map.jacobian(state.base().as_matrix(), state.as_matrix(), fd_step)?;
    Ok(residual(&j))
}

/// Symplecticity residual of one oHMC leapfrog step.
pub fn symplecticity_check<T: TargetModel + ?Sized>(
    target: &T,
    state: &TangentVector,
    eps: f64,
    fd_step: f64,
) -> Result<f64> {
    symplecticity_check_with(target, state, eps, fd_step, Drift::Cayley)
}

/// As [`symplecticity_check`] for any drift. Jacobians at `fd_step` and
/// `fd_step / 2` are combined by Richardson extrapolation; if they disagree
/// by more than [`RESOLUTION_TOL`] the step is unresolved and
/// [`Error::Resolution`] is returned.
pub fn symplecticity_check_with<T: TargetModel + ?Sized>(
    target: &T,
    state: &TangentVector,
    eps: f64,
    fd_step: f64,
    drift: Drift,
) -> Result<f64> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::Config(format!(
            "fd_step must be positive, got {fd_step}"
        )));
    }
    single_stiefel(target)?;
    let map = StepMap { target, eps, drift };
    let (theta, r) = (state.base().as_matrix(), state.as_matrix());
    let coarse = map.jacobian(theta, r, fd_step)?;
    let fine = map.jacobian(theta, r, 0.5 * fd_step)?;
    let disagreement = (&coarse - &fine).norm();
    if disagreement > RESOLUTION_TOL * fine.norm().max(1.0) {
        return Err(Error::Resolution {
            fd_step,
            disagreement,
        });
    }
    Ok(residual(&((fine * 4.0 - coarse) / 3.0)))
}
