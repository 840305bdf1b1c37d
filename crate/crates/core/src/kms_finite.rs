//! Exact KMS theory on a finite periodic orbit.
//!
//! A p-periodic orbit carries a matrix model: functions on the orbit
//! become diagonal matrices in M_p(C), the dynamics becomes the cyclic
//! shift U, and the potential F induces the diagonal Hamiltonian
//! H_jj = −Σ_{k<j} F(x_k) (H_11 = 0). The modular flow
//! σ_t(a) = e^{itH}·a·e^{−itH} then has a unique KMS_β state per β —
//! the Gibbs state Tr(e^{−βH}·)/Tr(e^{−βH}) — whose restriction to the
//! diagonal is exactly the conformal measure on the orbit.
//!
//! The shift admits a circle of inequivalent twisted representations
//! π_z (z ∈ T) with π_z(U)^p = z·1; states built from a probability
//! measure on that circle form the face of KMS states sitting over the
//! orbit measure, and distinct face states can restrict to the same
//! conformal measure — the restriction map is not injective.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::detect_period;
use crate::conformal::WeightedAtomicMeasure;
use crate::dynsys::{DynSystem, Point};
use crate::error::{Error, Result};
use crate::numerics::{logsumexp, CompensatedSum};
use crate::potential::Potential;

/// Outcome of the loop-telescoping check on a value sequence.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CyclicCheck {
    pub cyclic: bool,
    /// |Σ_k F(x_k)| around the loop.
    pub defect: f64,
}

/// Does the potential telescope to zero around the loop? The matrix
/// model is exact, so the gate is at rounding scale.
pub fn check_f_cyclic(f_values: &[f64]) -> CyclicCheck {
    let mut acc = CompensatedSum::new();
    for &v in f_values {
        acc.add(v);
    }
    let defect = acc.value().abs();
    CyclicCheck {
        cyclic: defect <= 1e-12,
        defect,
    }
}

#[derive(Clone, Debug)]
pub struct FiniteOrbitModel {
    /// F around the orbit: f_values[k] = F(φ^k x), k = 0..p−1.
    f_values: Vec<f64>,
    /// H_jj (0-based j): 0, −F(x_0), −(F(x_0)+F(x_1)), …
    h_diag: Vec<f64>,
}

/// The KMS_β (Gibbs) state of the model, restricted to the diagonal.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsState {
    pub beta: f64,
    /// Probability weights on the orbit points, w_j ∝ e^{−β·H_jj}.
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl FiniteOrbitModel {
    pub fn new(f_values: Vec<f64>) -> Result<Self> {
        if f_values.is_empty() {
            return Err(Error::Config {
                field: "f_values".into(),
                detail: "a finite-orbit model needs at least one point".into(),
            });
        }
        let mut h_diag = Vec::with_capacity(f_values.len());
        let mut acc = 0.0;
        for &v in &f_values {
            h_diag.push(-acc);
            acc += v;
        }
        Ok(FiniteOrbitModel { f_values, h_diag })
    }

    /// Build the model from a periodic orbit of a concrete system. The
    /// potential must telescope to zero around the loop, so that the
    /// induced dynamics is genuinely p-periodic.
    pub fn from_orbit(
        system: &DynSystem,
        f: &Potential,
        x: &Point,
        max_period: u32,
    ) -> Result<Self> {
        let period = detect_period(system, x, max_period)?.ok_or(Error::NotPeriodic {
            period: max_period,
            detail: "orbit does not close within the allowed period".into(),
        })?;
        let points = system.orbit_segment(x, 0, i64::from(period) - 1)?;
        let f_values: Vec<f64> = points
            .iter()
            .map(|p| f.eval(system, p))
            .collect::<Result<Vec<_>>>()?;
        let model = FiniteOrbitModel::new(f_values)?;
        model.require_f_cyclic()?;
        Ok(model)
    }

    pub fn period(&self) -> usize {
        self.f_values.len()
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn hamiltonian_diagonal(&self) -> &[f64] {
        &self.h_diag
    }

    pub fn cyclic_check(&self) -> CyclicCheck {
        check_f_cyclic(&self.f_values)
    }

    pub fn require_f_cyclic(&self) -> Result<()> {
        let check = self.cyclic_check();
        if !check.cyclic {
            return Err(Error::ConstraintViolation {
                condition: "cyclic potential sum".into(),
                detail: format!(
                    "Σ F around the {}-cycle is {:.3e}, not 0: the induced dynamics is \
                     not periodic and no Gibbs state exists on this loop",
                    self.period(),
                    check.defect
                ),
            });
        }
        Ok(())
    }

    fn log_gibbs_weights(&self, beta: f64) -> Vec<f64> {
        let log_terms: Vec<f64> = self.h_diag.iter().map(|h| -beta * h).collect();
        let log_z = logsumexp(&log_terms);
        log_terms.iter().map(|t| t - log_z).collect()
    }

    /// The unique KMS_β state of the modular flow: weights
    /// e^{−β·H_jj} / Z, computed in the log domain. Demands an
    /// F-cyclic loop — anything else has no periodic dynamics to be
    /// KMS for.
    pub fn gibbs_state(&self, beta: f64) -> Result<GibbsState> {
        self.require_f_cyclic()?;
        let log_weights = self.log_gibbs_weights(beta);
        let weights = log_weights.iter().map(|lw| lw.exp()).collect();
        Ok(GibbsState {
            beta,
            weights,
            log_weights,
        })
    }

    /// σ_{iβ}(a) = e^{−βH}·a·e^{βH}, entrywise (exact for diagonal H).
    pub fn analytic_extension(&self, a: &Array2<Complex64>, beta: f64) -> Array2<Complex64> {
        let p = self.period();
        let mut out = Array2::<Complex64>::zeros((p, p));
        for j in 0..p {
            for k in 0..p {
                out[(j, k)] = a[(j, k)] * (beta * (self.h_diag[k] - self.h_diag[j])).exp();
            }
        }
        out
    }

    fn check_shape(&self, name: &'static str, m: &Array2<Complex64>) -> Result<()> {
        let p = self.period();
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::Config {
                field: name.into(),
                detail: format!(
                    "expected a {p}×{p} matrix, got {}×{}",
                    m.nrows(),
                    m.ncols()
                ),
            });
        }
        Ok(())
    }

    fn weighted_trace(weights: &[f64], m: &Array2<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, w) in weights.iter().enumerate() {
            acc += m[(j, j)] * *w;
        }
        acc
    }

    /// τ_β(m) for the Gibbs state.
    pub fn gibbs_trace(&self, beta: f64, m: &Array2<Complex64>) -> Result<Complex64> {
        let g = self.gibbs_state(beta)?;
        self.check_shape("matrix", m)?;
        Ok(Self::weighted_trace(&g.weights, m))
    }

    /// KMS defect |ω(ab) − ω(b·σ_{iβ}(a))| of the *Gibbs* state on one
    /// matrix pair — zero up to rounding, always.
    pub fn kms_residual_pair(
        &self,
        beta: f64,
        a: &Array2<Complex64>,
        b: &Array2<Complex64>,
    ) -> Result<f64> {
        let g = self.gibbs_state(beta)?;
        self.state_kms_residual(&g.weights, beta, a, b)
    }

    /// KMS defect of an arbitrary diagonal state (given by `weights`)
    /// against the modular flow of this model — how the uniqueness of
    /// the Gibbs state is witnessed numerically.
    pub fn state_kms_residual(
        &self,
        weights: &[f64],
        beta: f64,
        a: &Array2<Complex64>,
        b: &Array2<Complex64>,
    ) -> Result<f64> {
        if weights.len() != self.period() {
            return Err(Error::Config {
                field: "weights".into(),
                detail: format!(
                    "expected {} weights, got {}",
                    self.period(),
                    weights.len()
                ),
            });
        }
        self.check_shape("a", a)?;
        self.check_shape("b", b)?;
        let lhs = Self::weighted_trace(weights, &a.dot(b));
        let rhs = Self::weighted_trace(weights, &b.dot(&self.analytic_extension(a, beta)));
        Ok((lhs - rhs).norm())
    }

    /// Worst KMS defect of the Gibbs state over `trials` pseudorandom
    /// matrix pairs with entries in the unit box.
    pub fn kms_residual_random(&self, beta: f64, trials: usize, seed: u64) -> Result<f64> {
        let p = self.period();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let random_matrix = |rng: &mut ChaCha8Rng| {
            let mut m = Array2::<Complex64>::zeros((p, p));
            for j in 0..p {
                for k in 0..p {
                    m[(j, k)] =
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            m
        };
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let a = random_matrix(&mut rng);
            let b = random_matrix(&mut rng);
            worst = worst.max(self.kms_residual_pair(beta, &a, &b)?);
        }
        Ok(worst)
    }

    /// The twisted shift π_z(U): e_j ↦ e_{j+1}, e_{p−1} ↦ z·e_0.
    pub fn shift_representation(&self, z: Complex64) -> Array2<Complex64> {
        let p = self.period();
        let mut u = Array2::<Complex64>::zeros((p, p));
        for j in 0..p {
            let i = (j + 1) % p;
            u[(i, j)] = if j + 1 == p { z } else { Complex64::new(1.0, 0.0) };
        }
        u
    }

    pub fn diagonal_representation(&self, g_values: &[f64]) -> Result<Array2<Complex64>> {
        let p = self.period();
        if g_values.len() != p {
            return Err(Error::Config {
                field: "g_values".into(),
                detail: format!("expected {p} orbit values, got {}", g_values.len()),
            });
        }
        let mut d = Array2::<Complex64>::zeros((p, p));
        for (j, &v) in g_values.iter().enumerate() {
            d[(j, j)] = Complex64::new(v, 0.0);
        }
        Ok(d)
    }

    /// Frobenius norms of π_z(U^p − z₀·1) at z = z₀ and at a probe
    /// z₁ ≠ z₀: the first vanishes while the second does not, so no
    /// single twisted representation is faithful.
    pub fn non_injectivity_witness(&self, z0: Complex64, z1: Complex64) -> (f64, f64) {
        let eval = |z: Complex64| -> f64 {
            let u = self.shift_representation(z);
            let up = matrix_power(&u, self.period() as i64);
            let mut frob = 0.0;
            for j in 0..self.period() {
                for k in 0..self.period() {
                    let sub = if j == k { z0 } else { Complex64::new(0.0, 0.0) };
                    frob += (up[(j, k)] - sub).norm_sqr();
                }
            }
            frob.sqrt()
        };
        (eval(z0), eval(z1))
    }
}

/// Free-function form of the per-pair Gibbs KMS defect.
pub fn kms_residual(
    model: &FiniteOrbitModel,
    beta: f64,
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
) -> Result<f64> {
    model.kms_residual_pair(beta, a, b)
}

// ---------------------------------------------------------------------------
// The face of KMS states over one orbit measure
// ---------------------------------------------------------------------------

/// A KMS state in the face over the orbit's conformal measure,
/// parametrized by a probability measure on the circle of twists:
/// ω_m(g·U^n) = Σ_i w_i · τ_β(diag(g)·π_{z_i}(U)^n). On monomials with
/// p ∤ n every such state vanishes; at n = 0 it restricts to the
/// conformal measure regardless of m — which is exactly why the
/// restriction map is not injective.
#[derive(Clone, Debug)]
pub struct CircleFaceState {
    model: FiniteOrbitModel,
    pub beta: f64,
    /// (z, weight): atoms of the parametrizing circle measure.
    pub atoms: Vec<(Complex64, f64)>,
}

impl CircleFaceState {
    pub fn new(
        model: FiniteOrbitModel,
        beta: f64,
        atoms: Vec<(Complex64, f64)>,
    ) -> Result<Self> {
        model.require_f_cyclic()?;
        if atoms.is_empty() {
            return Err(Error::Config {
                field: "atoms".into(),
                detail: "the circle measure needs at least one atom".into(),
            });
        }
        let mut mass = 0.0;
        for (z, w) in &atoms {
            if (z.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config {
                    field: "atoms".into(),
                    detail: format!("twist parameter {z} is not on the unit circle"),
                });
            }
            if *w < 0.0 {
                return Err(Error::Config {
                    field: "atoms".into(),
                    detail: format!("negative weight {w}"),
                });
            }
            mass += w;
        }
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Config {
                field: "atoms".into(),
                detail: format!("circle-measure weights sum to {mass}, not 1"),
            });
        }
        Ok(CircleFaceState { model, beta, atoms })
    }

    /// The extreme face state at a single twist z.
    pub fn dirac(model: FiniteOrbitModel, beta: f64, z: Complex64) -> Result<Self> {
        CircleFaceState::new(model, beta, vec![(z, 1.0)])
    }

    pub fn model(&self) -> &FiniteOrbitModel {
        &self.model
    }

    /// ω_m(g·U^n), evaluated through the matrix model.
    pub fn eval(&self, g_values: &[f64], n: i64) -> Result<Complex64> {
        let d = self.model.diagonal_representation(g_values)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (z, w) in &self.atoms {
            let u = self.model.shift_representation(*z);
            let un = matrix_power(&u, n);
            acc += self.model.gibbs_trace(self.beta, &d.dot(&un))? * *w;
        }
        Ok(acc)
    }
}

/// ω_m(g·U^n) for a face state — the named entry point.
pub fn face_state_eval(face: &CircleFaceState, g_values: &[f64], n: i64) -> Result<Complex64> {
    face.eval(g_values, n)
}

/// The state a conformal measure induces on monomials g·U^n: the
/// measure of g at n = 0 and exactly zero otherwise. This is the
/// common diagonal restriction of *every* face state over m.
pub fn diagonal_state_eval(
    m: &WeightedAtomicMeasure,
    g: impl Fn(&Point) -> f64,
    n: i64,
) -> Complex64 {
    if n != 0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(m.integrate(g), 0.0)
}

/// U^n for n ∈ ℤ (U unitary: negative powers via the adjoint).
fn matrix_power(u: &Array2<Complex64>, n: i64) -> Array2<Complex64> {
    let p = u.nrows();
    let base = if n >= 0 {
        u.clone()
    } else {
        u.t().mapv(|c| c.conj())
    };
    let mut out = Array2::<Complex64>::eye(p);
    for _ in 0..n.unsigned_abs() {
        out = out.dot(&base);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{atomic_periodic, PeriodicOutcome};

    #[test]
    fn two_point_gibbs_weights() {
        let model = FiniteOrbitModel::new(vec![1.0, -1.0]).unwrap();
        assert!(model.cyclic_check().cyclic);
        // H = (0, −1): weights (1, e^β)/Z
        let g = model.gibbs_state(1.0).unwrap();
        assert!((g.weights[0] - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert!((g.weights[1] - 0.731_058_578_630_004_9).abs() < 1e-15);
        let g0 = model.gibbs_state(0.0).unwrap();
        assert!((g0.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gibbs_state_matches_the_orbit_measure() {
        let s = DynSystem::finite_cycle(3).unwrap();
        let f = Potential::from_cycle_values(vec![1.0, -2.0, 1.0]);
        let x = Point::cycle(3, 1).unwrap();
        let model = FiniteOrbitModel::from_orbit(&s, &f, &x, 10).unwrap();
        for beta in [-2.0, -0.3, 0.0, 0.7, 2.0] {
            let g = model.gibbs_state(beta).unwrap();
            let m = match atomic_periodic(&s, &f, &x, 3, beta).unwrap() {
                PeriodicOutcome::Measure(m) => m,
                other => panic!("expected a measure, got {other:?}"),
            };
            for j in 0..3 {
                assert!(
                    (g.weights[j] - m.weight(j)).abs() < 1e-14,
                    "beta={beta} j={j}: {} vs {}",
                    g.weights[j],
                    m.weight(j)
                );
            }
        }
    }

    #[test]
    fn kms_identity_holds_to_rounding() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 2..=6usize {
            let mut vals: Vec<f64> = (0..p - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let tail: f64 = -vals.iter().sum::<f64>();
            vals.push(tail);
            let model = FiniteOrbitModel::new(vals).unwrap();
            for beta in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                let r = model.kms_residual_random(beta, 20, 42).unwrap();
                assert!(r < 1e-10, "p={p} beta={beta}: residual {r:e}");
            }
        }
    }

    #[test]
    fn only_the_gibbs_weights_satisfy_kms() {
        // uniform weights, β ≠ 0, nonconstant H: the KMS identity must
        // visibly fail on some matrix unit pair
        let model = FiniteOrbitModel::new(vec![1.0, -1.0]).unwrap();
        let p = model.period();
        let uniform = vec![1.0 / p as f64; p];
        let mut worst = 0.0f64;
        for j in 0..p {
            for k in 0..p {
                let mut a = Array2::<Complex64>::zeros((p, p));
                a[(j, k)] = Complex64::new(1.0, 0.0);
                let b = a.t().mapv(|c| c.conj());
                worst = worst.max(
                    model
                        .state_kms_residual(&uniform, 1.0, &a, &b)
                        .unwrap(),
                );
            }
        }
        assert!(worst > 0.1, "uniform state passed KMS: {worst:e}");
    }

    #[test]
    fn twisted_representations_and_face_states() {
        let model = FiniteOrbitModel::new(vec![1.0, -1.0]).unwrap();
        let z = Complex64::from_polar(1.0, 0.9);
        let u = model.shift_representation(z);
        let u2 = matrix_power(&u, 2);
        // U² = z·1 in the twisted representation
        assert!((u2[(0, 0)] - z).norm() < 1e-15);
        assert!((u2[(1, 1)] - z).norm() < 1e-15);
        assert!(u2[(0, 1)].norm() < 1e-15);

        let g = vec![2.0, 4.0];
        let beta = 1.0;
        // n = 0: the conformal measure of g
        let direct: f64 = model
            .gibbs_state(beta)
            .unwrap()
            .weights
            .iter()
            .zip(&g)
            .map(|(w, v)| w * v)
            .sum();
        let face = CircleFaceState::dirac(model.clone(), beta, z).unwrap();
        let w0 = face_state_eval(&face, &g, 0).unwrap();
        assert!((w0 - direct).norm() < 1e-14);
        // n = 1: off-diagonal, every face state vanishes
        assert!(face_state_eval(&face, &g, 1).unwrap().norm() < 1e-15);
        // n = ±2: the twist shows up as z^{±1}
        let w2 = face_state_eval(&face, &g, 2).unwrap();
        assert!((w2 - z * direct).norm() < 1e-14);
        let wm2 = face_state_eval(&face, &g, -2).unwrap();
        assert!((wm2 - z.conj() * direct).norm() < 1e-14);

        // a mixed face state averages the twists
        let z2 = Complex64::from_polar(1.0, 2.1);
        let mixed =
            CircleFaceState::new(model, beta, vec![(z, 0.25), (z2, 0.75)]).unwrap();
        let m2 = mixed.eval(&g, 2).unwrap();
        assert!((m2 - (z * 0.25 + z2 * 0.75) * direct).norm() < 1e-14);
    }

    #[test]
    fn restriction_to_the_diagonal_forgets_the_twist() {
        let s = DynSystem::finite_cycle(2).unwrap();
        let f = Potential::from_cycle_values(vec![1.0, -1.0]);
        let x = Point::cycle(2, 1).unwrap();
        let m = match atomic_periodic(&s, &f, &x, 2, 1.0).unwrap() {
            PeriodicOutcome::Measure(m) => m,
            other => panic!("{other:?}"),
        };
        let model = FiniteOrbitModel::from_orbit(&s, &f, &x, 4).unwrap();

        let gv = vec![2.0, 4.0];
        let g = |p: &Point| match p {
            Point::Cycle { index, .. } => gv[(*index - 1) as usize],
            _ => 0.0,
        };

        // two extreme face states with different twists
        let z0 = Complex64::new(1.0, 0.0);
        let z1 = Complex64::new(-1.0, 0.0);
        let f0 = CircleFaceState::dirac(model.clone(), 1.0, z0).unwrap();
        let f1 = CircleFaceState::dirac(model, 1.0, z1).unwrap();

        // same restriction: n = 0 agrees with the conformal measure,
        // p ∤ n vanishes for both
        let d0 = diagonal_state_eval(&m, g, 0);
        assert!((f0.eval(&gv, 0).unwrap() - d0).norm() < 1e-14);
        assert!((f1.eval(&gv, 0).unwrap() - d0).norm() < 1e-14);
        assert_eq!(diagonal_state_eval(&m, g, 1), Complex64::new(0.0, 0.0));
        assert!(f0.eval(&gv, 1).unwrap().norm() < 1e-15);
        assert!(f1.eval(&gv, 1).unwrap().norm() < 1e-15);

        // ...but the states differ at n = ±p: restriction is not injective
        let at_p0 = f0.eval(&gv, 2).unwrap();
        let at_p1 = f1.eval(&gv, 2).unwrap();
        assert!((at_p0 - at_p1).norm() > 1.0, "{at_p0} vs {at_p1}");
        assert_eq!(diagonal_state_eval(&m, g, 2), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn no_single_twisted_representation_is_faithful() {
        let model = FiniteOrbitModel::new(vec![1.0, -1.0]).unwrap();
        let z0 = Complex64::from_polar(1.0, 0.3);
        let z1 = -z0;
        let (at_z0, at_z1) = model.non_injectivity_witness(z0, z1);
        assert!(at_z0 < 1e-15, "π_z0 should kill U^p − z0: {at_z0:e}");
        assert!((at_z1 - 2.0 * 2.0f64.sqrt()).abs() < 1e-12, "got {at_z1}");
    }

    #[test]
    fn noncyclic_potentials_are_rejected_everywhere() {
        let s = DynSystem::finite_cycle(3).unwrap();
        let f = Potential::from_cycle_values(vec![1.0, 1.0, 0.0]);
        let x = Point::cycle(3, 1).unwrap();
        match FiniteOrbitModel::from_orbit(&s, &f, &x, 10) {
            Err(Error::ConstraintViolation { .. }) => {}
            other => panic!("expected ConstraintViolation, got {other:?}"),
        }
        // a hand-built non-cyclic model exists but refuses a Gibbs state
        let model = FiniteOrbitModel::new(vec![1.0, 1.0, 0.0]).unwrap();
        let check = model.cyclic_check();
        assert!(!check.cyclic);
        assert!((check.defect - 2.0).abs() < 1e-15);
        assert!(matches!(
            model.gibbs_state(0.5),
            Err(Error::ConstraintViolation { .. })
        ));
        assert!(matches!(
            CircleFaceState::dirac(model, 0.5, Complex64::new(1.0, 0.0)),
            Err(Error::ConstraintViolation { .. })
        ));
    }
}
