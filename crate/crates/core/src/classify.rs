//! Murray–von Neumann type classification of the crossed-product
//! weight attached to a conformal measure.
//!
//! The decision tree, in order:
//!
//! 1. measure supported on a periodic F-cyclic orbit → type I_p;
//! 2. two-sided orbit sum Σ_{k∈ℤ} e^{β·S_k} certified convergent →
//!    type I_∞ (atomic measure on a free orbit);
//! 3. Cesàro averages (1/n)·Σ_{j<n} e^{β·S_j} bounded away from zero →
//!    type II_1 (a finite invariant measure equivalent to m);
//! 4. otherwise type II_∞ or III — the tools here do not separate
//!    those two, and the verdict says so rather than guessing.
//!
//! All verdicts presuppose that the measure handed in actually is
//! conformal at the given β; run the existence check and the residual
//! verification first.

use serde::Serialize;

use crate::birkhoff::{birkhoff_sum, OrbitSumTable};
use crate::conformal::{
    designated_orbit_table, summability_certificate, DensityMeasure, SummabilityReport,
    SummabilityVerdict, WeightedAtomicMeasure,
};
use crate::dynsys::{circle_distance, frac, Direction, DynSystem, Point};
use crate::error::{Error, Result};
use crate::numerics::{logsumexp2, CompensatedSum};
use crate::potential::Potential;

/// The type label itself; diagnostics live in [`TypeVerdict`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "label")]
pub enum TypeLabel {
    #[serde(rename = "I_p")]
    IPeriodic { period: u32 },
    #[serde(rename = "I_infinity")]
    IInfinite,
    #[serde(rename = "II_1")]
    II1,
    #[serde(rename = "II_inf_or_III")]
    IIInfOrIII,
}

/// The crossed-product algebra the label names.
pub fn factor_report(label: &TypeLabel) -> String {
    match label {
        TypeLabel::IPeriodic { period } => {
            format!("not a factor; M_{period}(C)⊗L^∞(T)")
        }
        TypeLabel::IInfinite => "factor of type I_∞".into(),
        TypeLabel::II1 => "factor of type II_1".into(),
        TypeLabel::IIInfOrIII => {
            "factor of type II_∞ or III — the two are not separated at this horizon".into()
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PeriodicEvidence {
    pub period: u32,
    /// |S_p| around the loop — β-independent; must be ≤ 1e-10 for the
    /// orbit to carry a conformal measure at any β ≠ 0.
    pub loop_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CesaroWeightEvidence {
    /// (n, (1/n)·Σ_{j<n} e^{β·S_j}) at H/8, H/4, H/2, H.
    pub checkpoints: Vec<(usize, f64)>,
    /// min of the Cesàro average over n ∈ [H/2, H].
    pub tail_min: f64,
    /// c(H)/c(H/4) — decaying averages (ratio well below 1) betray a
    /// vanishing liminf even when the tail minimum is still sizable.
    pub decay_ratio: f64,
    pub floor: f64,
    pub passed: bool,
}

/// Label plus everything that was measured on the way to it.
#[derive(Clone, Debug, Serialize)]
pub struct TypeVerdict {
    pub beta: f64,
    #[serde(flatten)]
    pub label: TypeLabel,
    pub factor_label: String,
    pub periodic: Option<PeriodicEvidence>,
    pub summability: Option<SummabilityReport>,
    pub cesaro: Option<CesaroWeightEvidence>,
}

#[derive(Clone, Copy, Debug)]
pub struct ClassifyConfig {
    /// Two-sided orbit-sum horizon for the summability and Cesàro
    /// evidence.
    pub horizon: usize,
    /// How far to walk when probing for a periodic orbit.
    pub max_period: u32,
    /// Slope margin handed to the summability certificate.
    pub delta: f64,
    /// Threshold below which a Cesàro liminf counts as zero.
    pub cesaro_floor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            horizon: 20_000,
            max_period: 1_000,
            delta: 0.05,
            cesaro_floor: 1e-6,
        }
    }
}

/// Which kind of conformal measure is being classified.
#[derive(Clone, Copy, Debug)]
pub enum MeasureRef<'a> {
    Atomic(&'a WeightedAtomicMeasure),
    Density(&'a DensityMeasure),
}

fn cesaro_weight_evidence(table: &OrbitSumTable, beta: f64, floor: f64) -> CesaroWeightEvidence {
    let (_, hi) = table.window();
    let h = hi as usize;
    let marks = [h / 8, h / 4, h / 2, h];
    // streaming log-sum-exp of β·S_j keeps β > 0 growth representable
    let mut log_acc = f64::NEG_INFINITY;
    let mut checkpoints = Vec::with_capacity(4);
    let mut tail_min = f64::INFINITY;
    let mut log_quarter = f64::NEG_INFINITY;
    for n in 1..=h {
        log_acc = logsumexp2(log_acc, beta * table.s(n as i64 - 1));
        let c_log = log_acc - (n as f64).ln();
        if n >= h / 2 {
            tail_min = tail_min.min(c_log.exp());
        }
        if n == h / 4 {
            log_quarter = c_log;
        }
        if marks.contains(&n) {
            checkpoints.push((n, c_log.exp()));
        }
    }
    let c_end_log = log_acc - (h as f64).ln();
    let decay_ratio = (c_end_log - log_quarter).exp();
    let passed = tail_min >= floor && decay_ratio >= 0.5;
    CesaroWeightEvidence {
        checkpoints,
        tail_min,
        decay_ratio,
        floor,
        passed,
    }
}

/// Classification from a precomputed cocycle table (no periodicity
/// probe — the caller vouches that the orbit is free).
pub fn classify_from_table(
    table: &OrbitSumTable,
    beta: f64,
    cfg: &ClassifyConfig,
) -> Result<TypeVerdict> {
    let summability = summability_certificate(table, beta, cfg.delta)?;
    if summability.verdict == SummabilityVerdict::Convergent {
        let label = TypeLabel::IInfinite;
        return Ok(TypeVerdict {
            beta,
            factor_label: factor_report(&label),
            label,
            periodic: None,
            summability: Some(summability),
            cesaro: None,
        });
    }
    let cesaro = cesaro_weight_evidence(table, beta, cfg.cesaro_floor);
    let label = if cesaro.passed {
        TypeLabel::II1
    } else {
        TypeLabel::IIInfOrIII
    };
    Ok(TypeVerdict {
        beta,
        factor_label: factor_report(&label),
        label,
        periodic: None,
        summability: Some(summability),
        cesaro: Some(cesaro),
    })
}

/// Walk the orbit of x looking for an exact (cycle) or numerically
/// certain (distance ≤ 1e-12) return to the seed.
pub(crate) fn detect_period(system: &DynSystem, x: &Point, max_period: u32) -> Result<Option<u32>> {
    let mut y = x.clone();
    for p in 1..=max_period {
        y = system.step(&y, Direction::Forward)?;
        let closed = match (&y, x) {
            (Point::Cycle { index: i1, .. }, Point::Cycle { index: i2, .. }) => i1 == i2,
            (a, b) => {
                let d = match a {
                    Point::Circle(_) => circle_distance(a.as_f64(), b.as_f64()),
                    _ => (a.as_f64() - b.as_f64()).abs(),
                };
                d <= 1e-12
            }
        };
        if closed {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Full classification of a conformal measure: periodicity of its
/// supporting orbit, then the summability/Cesàro tree along it.
///
/// An atomic measure is analyzed at its own base point; a density
/// measure (rotation only) has no distinguished point, so the tree
/// runs along the orbit of 0, which is typical for a minimal rotation.
pub fn classify_measure(
    m: MeasureRef<'_>,
    system: &DynSystem,
    f: &Potential,
    beta: f64,
    horizon: usize,
) -> Result<TypeVerdict> {
    let cfg = ClassifyConfig {
        horizon: horizon.max(1_000),
        ..Default::default()
    };
    let (m_beta, base) = match m {
        MeasureRef::Atomic(am) => (am.beta, am.base_point().clone()),
        MeasureRef::Density(dm) => (dm.beta, Point::circle(0.0)),
    };
    if (m_beta - beta).abs() > 1e-12 {
        return Err(Error::Config {
            field: "beta".into(),
            detail: format!(
                "the measure was built at β = {m_beta} but classification was requested at β = {beta}"
            ),
        });
    }

    if let MeasureRef::Atomic(am) = m {
        let probe = (am.points.len() as u32).min(cfg.max_period);
        if let Some(period) = detect_period(system, &base, probe)? {
            let s_p = birkhoff_sum(system, f, &base, i64::from(period))?;
            let loop_defect = s_p.abs();
            if loop_defect > 1e-10 {
                return Err(Error::ConstraintViolation {
                    condition: "cyclic potential sum".into(),
                    detail: format!(
                        "the supporting orbit closes after {period} steps but S_{period} = \
                         {s_p:.6e} does not telescope, so the measure cannot be conformal \
                         at any β ≠ 0"
                    ),
                });
            }
            let label = TypeLabel::IPeriodic { period };
            return Ok(TypeVerdict {
                beta,
                factor_label: factor_report(&label),
                label,
                periodic: Some(PeriodicEvidence {
                    period,
                    loop_defect,
                }),
                summability: None,
                cesaro: None,
            });
        }
    }

    let table = designated_orbit_table(system, f, &base, cfg.horizon, cfg.horizon)?;
    classify_from_table(&table, beta, &cfg)
}

// ---------------------------------------------------------------------------
// Orbit-wise cocycle solution and its invariant companion
// ---------------------------------------------------------------------------

/// The transfer equation βF = h∘φ − h solved along one orbit:
/// h(φ^k x) = β·S_k(x) with the normalization h(x) = 0. Exact by
/// telescoping on the orbit — the question is never whether h exists
/// there but whether it stays bounded / exponentially integrable, and
/// the statistics here are the evidence.
#[derive(Clone, Debug)]
pub struct CocycleSolution {
    pub base: Point,
    pub beta: f64,
    pub window: (i64, i64),
    /// h(φ^k x) for k ∈ window.0..=window.1, indexed k − window.0.
    pub values: Vec<f64>,
    /// sup |h| over the whole window.
    pub sup_abs: f64,
    /// (w, sup_{|k| ≤ w} |h(φ^k x)|) at doubling sub-windows — flat
    /// checkpoints certify a bounded transfer function on this orbit.
    pub sup_checkpoints: Vec<(usize, f64)>,
    /// (w, ln Σ_{|k| ≤ w} e^{−h(φ^k x)}) at the same sub-windows — the
    /// exp-integrability trend of the would-be invariant density e^{−h}
    /// against counting measure on the orbit.
    pub log_exp_integral_checkpoints: Vec<(usize, f64)>,
}

impl CocycleSolution {
    pub fn value(&self, k: i64) -> f64 {
        self.values[(k - self.window.0) as usize]
    }
}

/// Solve βF = h∘φ − h along the orbit of x, out to ±window.
pub fn solve_cocycle(
    system: &DynSystem,
    x: &Point,
    f: &Potential,
    beta: f64,
    window: usize,
) -> Result<CocycleSolution> {
    let w = window.max(8);
    let table = designated_orbit_table(system, f, x, w, w)?;
    let lo = -(w as i64);
    let values: Vec<f64> = (lo..=w as i64).map(|k| beta * table.s(k)).collect();
    let sup_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sup_checkpoints = Vec::with_capacity(4);
    let mut log_exp_integral_checkpoints = Vec::with_capacity(4);
    for ww in [w / 8, w / 4, w / 2, w] {
        if ww == 0 {
            continue;
        }
        let sup = (-(ww as i64)..=ww as i64)
            .map(|k| (beta * table.s(k)).abs())
            .fold(0.0f64, f64::max);
        let terms: Vec<f64> = (-(ww as i64)..=ww as i64)
            .map(|k| -beta * table.s(k))
            .collect();
        sup_checkpoints.push((ww, sup));
        log_exp_integral_checkpoints.push((ww, crate::numerics::logsumexp(&terms)));
    }
    Ok(CocycleSolution {
        base: x.clone(),
        beta,
        window: (lo, w as i64),
        values,
        sup_abs,
        sup_checkpoints,
        log_exp_integral_checkpoints,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassTrend {
    /// The companion's mass saturates across window doublings: a finite
    /// invariant measure (the II_1 route).
    Finite,
    /// The mass keeps growing with the window: only an infinite
    /// invariant companion exists on this orbit (the II_∞ route).
    Diverging,
    Undecided,
}

/// The candidate invariant measure ν = e^{−h}·m, reported through its
/// mass trend and an invariance residual.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantMeasureEstimate {
    /// (sub-window or grid size, accumulated ν-mass).
    pub mass_checkpoints: Vec<(usize, f64)>,
    pub trend: MassTrend,
    /// For atomic input: total variation of k ↦ ν_k along the orbit
    /// relative to the mass (0 ⟺ the companion is exactly invariant
    /// atom-to-atom). For density input: worst harmonic defect of
    /// ∫g∘φ dν = ∫g dν by quadrature.
    pub invariance_residual: f64,
    /// ln ν_k per atom (atomic input only).
    pub nu_log_weights: Option<Vec<f64>>,
}

/// Reweight a conformal measure by e^{−h} using an orbit-wise cocycle
/// solution and report whether the companion is a finite or an
/// infinite invariant measure.
///
/// For an atomic m the companion weights are ν_k = m{φ^k x}·e^{−h(φ^k x)}
/// and the mass is accumulated over doubling sub-windows of the
/// measure's own support (a typical divergent picture: constant ν_k,
/// counting measure). For a density m the companion is
/// e^{−(βH − βH(x₀))}·dm, a multiple of Lebesgue; its mass checkpoints
/// are quadrature refinements and the trend is finite. The solution
/// must cover the measure's support and share its base point.
pub fn invariant_from_cocycle(
    m: MeasureRef<'_>,
    sol: &CocycleSolution,
) -> Result<InvariantMeasureEstimate> {
    match m {
        MeasureRef::Atomic(am) => {
            let same_base = match (&sol.base, am.base_point()) {
                (Point::Cycle { index: i1, .. }, Point::Cycle { index: i2, .. }) => i1 == i2,
                (a, b) => {
                    let d = match a {
                        Point::Circle(_) => circle_distance(a.as_f64(), b.as_f64()),
                        _ => (a.as_f64() - b.as_f64()).abs(),
                    };
                    d <= 1e-12
                }
            };
            if !same_base {
                return Err(Error::ConstraintViolation {
                    condition: "matching supports".into(),
                    detail: "the cocycle solution is anchored at a different point than the \
                             measure's orbit"
                        .into(),
                });
            }
            let (a, b) = am.k_range;
            if a < sol.window.0 || b > sol.window.1 {
                return Err(Error::ConstraintViolation {
                    condition: "matching supports".into(),
                    detail: format!(
                        "the measure's atoms span [{a}, {b}] but the cocycle solution only \
                         covers [{}, {}]",
                        sol.window.0, sol.window.1
                    ),
                });
            }
            let nu_log: Vec<f64> = (a..=b)
                .map(|k| am.log_weights[(k - a) as usize] - sol.value(k))
                .collect();

            let half_width = (-a).max(b) as usize;
            let mut mass_checkpoints = Vec::with_capacity(4);
            for w in [half_width / 8, half_width / 4, half_width / 2, half_width] {
                if w == 0 {
                    continue;
                }
                let mut acc = CompensatedSum::new();
                for k in a.max(-(w as i64))..=b.min(w as i64) {
                    acc.add(nu_log[(k - a) as usize].exp());
                }
                mass_checkpoints.push((w, acc.value()));
            }
            let trend = mass_trend(&mass_checkpoints);

            let mass = mass_checkpoints.last().map(|c| c.1).unwrap_or(0.0);
            let mut variation = CompensatedSum::new();
            for i in 0..nu_log.len().saturating_sub(1) {
                variation.add((nu_log[i + 1].exp() - nu_log[i].exp()).abs());
            }
            Ok(InvariantMeasureEstimate {
                mass_checkpoints,
                trend,
                invariance_residual: variation.value() / mass.max(f64::MIN_POSITIVE),
                nu_log_weights: Some(nu_log),
            })
        }
        MeasureRef::Density(dm) => {
            let x0 = match &sol.base {
                p @ Point::Circle(_) => p.as_f64(),
                other => {
                    return Err(Error::ConstraintViolation {
                        condition: "matching supports".into(),
                        detail: format!(
                            "a density measure lives on the circle but the cocycle solution \
                             is anchored on the {}",
                            other.space_name()
                        ),
                    })
                }
            };
            let h0 = dm.beta * dm.transfer_function().eval(x0);
            let nu = |x: f64| dm.density(x) * (h0 - dm.beta * dm.transfer_function().eval(x)).exp();
            let base_grid = dm.grid.max(1 << 10);
            let mut mass_checkpoints = Vec::with_capacity(3);
            for shift in [2usize, 1, 0] {
                let g = base_grid >> shift;
                let mut acc = CompensatedSum::new();
                for i in 0..g {
                    acc.add(nu(i as f64 / g as f64));
                }
                mass_checkpoints.push((g, acc.value() / g as f64));
            }
            let trend = mass_trend(&mass_checkpoints);
            let mass = mass_checkpoints.last().unwrap().1;

            let tau = std::f64::consts::TAU;
            let mut worst = 0.0f64;
            for j in 1..=4u32 {
                let wv = tau * f64::from(j);
                for g in [f64::cos as fn(f64) -> f64, f64::sin as fn(f64) -> f64] {
                    let mut lhs = CompensatedSum::new();
                    let mut rhs = CompensatedSum::new();
                    for i in 0..base_grid {
                        let x = i as f64 / base_grid as f64;
                        let w = nu(x);
                        lhs.add(g(wv * frac(x + dm.alpha)) * w);
                        rhs.add(g(wv * x) * w);
                    }
                    worst = worst
                        .max((lhs.value() - rhs.value()).abs() / base_grid as f64 / mass);
                }
            }
            Ok(InvariantMeasureEstimate {
                mass_checkpoints,
                trend,
                invariance_residual: worst,
                nu_log_weights: None,
            })
        }
    }
}

/// Read the trend from the mass accumulated at the final checkpoint
/// against the quarter-window one: saturation means a finite measure,
/// steady growth an infinite one.
fn mass_trend(checkpoints: &[(usize, f64)]) -> MassTrend {
    if checkpoints.len() < 2 {
        return MassTrend::Undecided;
    }
    let last = checkpoints[checkpoints.len() - 1].1;
    let anchor = checkpoints[checkpoints.len().saturating_sub(3)].1;
    if anchor <= 0.0 || !last.is_finite() {
        return MassTrend::Undecided;
    }
    let ratio = last / anchor;
    if ratio <= 1.2 {
        MassTrend::Finite
    } else if ratio >= 2.0 {
        MassTrend::Diverging
    } else {
        MassTrend::Undecided
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{
        atomic_periodic, coboundary_conformal_density, hopf_construct, PeriodicOutcome,
    };
    use crate::dynsys::RotationNumber;
    use crate::potential::TrigPoly;

    fn golden() -> DynSystem {
        DynSystem::rotation(RotationNumber::golden())
    }

    #[test]
    fn periodic_cyclic_orbit_is_type_i_p() {
        let s = DynSystem::finite_cycle(4).unwrap();
        let f = Potential::from_cycle_values(vec![1.0, -1.0, 2.0, -2.0]);
        let x = Point::cycle(4, 1).unwrap();
        let m = match atomic_periodic(&s, &f, &x, 4, 1.5).unwrap() {
            PeriodicOutcome::Measure(m) => m,
            other => panic!("expected a measure, got {other:?}"),
        };
        let rep = classify_measure(MeasureRef::Atomic(&m), &s, &f, 1.5, 4_000).unwrap();
        assert_eq!(rep.label, TypeLabel::IPeriodic { period: 4 });
        assert_eq!(rep.factor_label, "not a factor; M_4(C)⊗L^∞(T)");
        assert!(rep.periodic.unwrap().loop_defect <= 1e-10);
    }

    #[test]
    fn fixed_point_measures_demand_a_cyclic_potential() {
        let s = DynSystem::squaring();
        let dirac = |fv: f64, beta: f64| WeightedAtomicMeasure {
            beta,
            points: vec![Point::interval(0.0).unwrap()],
            k_range: (0, 0),
            log_weights: vec![0.0],
            birkhoff_sums: vec![fv],
            boundary_defect: 0.0,
            log_partition: 0.0,
        };

        // F(0) = −1/2 ≠ 0: the loop does not telescope at any β
        let f = Potential::affine(1.0, -0.5);
        for beta in [1.0, 0.0] {
            match classify_measure(MeasureRef::Atomic(&dirac(-0.5, beta)), &s, &f, beta, 2_000) {
                Err(Error::ConstraintViolation { .. }) => {}
                other => panic!("expected ConstraintViolation, got {other:?}"),
            }
        }

        // F(0) = 0: Dirac at the fixed point is conformal, type I_1
        let f = Potential::affine(1.0, 0.0);
        let rep =
            classify_measure(MeasureRef::Atomic(&dirac(0.0, 1.0)), &s, &f, 1.0, 2_000).unwrap();
        assert_eq!(rep.label, TypeLabel::IPeriodic { period: 1 });
        assert_eq!(rep.factor_label, "not a factor; M_1(C)⊗L^∞(T)");
    }

    #[test]
    fn bounded_coboundary_weights_are_type_ii_1() {
        let s = golden();
        let f = Potential::coboundary(Potential::TrigPoly(TrigPoly::cosine(1, 1.0)));
        let x = Point::circle(0.3);
        for beta in [0.0, 2.0, -3.0] {
            let rep = hopf_construct(&s, &f, &x, beta, 1e-2, 4_000, &[]).unwrap();
            let verdict =
                classify_measure(MeasureRef::Atomic(&rep.measure), &s, &f, beta, 4_000).unwrap();
            assert_eq!(verdict.label, TypeLabel::II1, "beta={beta}: {verdict:?}");
            assert_eq!(verdict.factor_label, "factor of type II_1");
            let c = verdict.cesaro.unwrap();
            assert!(c.tail_min > 1e-4);
            assert!(c.decay_ratio > 0.9);
        }
    }

    #[test]
    fn summable_synthetic_cocycle_is_type_i_infinity() {
        let t = OrbitSumTable::from_cocycle_fn(Point::circle(0.0), 20_000, 20_000, |k| {
            2.0 * (1.0 + k.unsigned_abs() as f64).ln()
        });
        let rep = classify_from_table(&t, -1.0, &ClassifyConfig::default()).unwrap();
        assert_eq!(rep.label, TypeLabel::IInfinite, "{rep:?}");
        assert_eq!(rep.factor_label, "factor of type I_∞");
    }

    #[test]
    fn harmonic_synthetic_cocycle_is_beyond_ii_1() {
        // terms 1/(1+|k|): divergent sum, Cesàro average → 0 like ln n / n —
        // the decay-ratio guard must catch this even though the raw tail
        // minimum is far above the floor
        let t = OrbitSumTable::from_cocycle_fn(Point::circle(0.0), 20_000, 20_000, |k| {
            (1.0 + k.unsigned_abs() as f64).ln()
        });
        let rep = classify_from_table(&t, -1.0, &ClassifyConfig::default()).unwrap();
        assert_eq!(rep.label, TypeLabel::IIInfOrIII, "{rep:?}");
        let c = rep.cesaro.unwrap();
        assert!(
            c.tail_min > 1e-6,
            "tail min {:?} — the guard, not the floor, must decide",
            c.tail_min
        );
        assert!(c.decay_ratio < 0.5);
    }

    #[test]
    fn orbit_cocycle_solution_telescopes_exactly() {
        let s = golden();
        let h_poly = TrigPoly::cosine(1, 1.0);
        let f = Potential::coboundary(Potential::TrigPoly(h_poly.clone()));
        let x = Point::circle(0.3);
        let beta = 1.7;
        let sol = solve_cocycle(&s, &x, &f, beta, 2_000).unwrap();
        assert_eq!(sol.value(0), 0.0);
        // h(φ^{k+1}x) − h(φ^k x) = β·F(φ^k x), up to accumulation rounding
        for k in [-1500i64, -3, 0, 7, 1999] {
            let p = s.iterate(&x, k).unwrap();
            let fv = f.eval(&s, &p).unwrap();
            assert!(
                (sol.value(k + 1) - sol.value(k) - beta * fv).abs() < 1e-10,
                "telescoping breaks at k={k}"
            );
        }
        // a coboundary's orbit solution is bounded: flat sup checkpoints
        assert!(sol.sup_abs <= 2.0 * beta * 1.0 + 1e-9);
        let first = sol.sup_checkpoints[0].1;
        let last = sol.sup_checkpoints[3].1;
        assert!(last <= first * 1.5 + 1e-9, "{:?}", sol.sup_checkpoints);
    }

    #[test]
    fn invariant_companion_of_atomic_conformal_measures_is_counting() {
        let s = golden();
        // drifting cocycle: m concentrates forward, ν flattens to counting
        let f = Potential::Constant(1.0);
        let x = Point::circle(0.3);
        let rep = hopf_construct(&s, &f, &x, 1.0, 1e-6, 1_024, &[]).unwrap();
        let sol = solve_cocycle(&s, &x, &f, 1.0, 2_000).unwrap();
        let est = invariant_from_cocycle(MeasureRef::Atomic(&rep.measure), &sol).unwrap();
        assert_eq!(est.trend, MassTrend::Diverging, "{est:?}");
        assert!(est.invariance_residual < 1e-9, "{est:?}");
        let nu = est.nu_log_weights.unwrap();
        let spread = nu.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
            - nu.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        assert!(spread < 1e-9, "ν must be constant along the orbit: {spread:e}");

        // support mismatch: solution window too small for the measure
        let short = solve_cocycle(&s, &x, &f, 1.0, 64).unwrap();
        assert!(matches!(
            invariant_from_cocycle(MeasureRef::Atomic(&rep.measure), &short),
            Err(Error::ConstraintViolation { .. })
        ));
        // or anchored elsewhere
        let elsewhere = solve_cocycle(&s, &Point::circle(0.9), &f, 1.0, 2_000).unwrap();
        assert!(matches!(
            invariant_from_cocycle(MeasureRef::Atomic(&rep.measure), &elsewhere),
            Err(Error::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn invariant_companion_of_a_density_measure_is_lebesgue() {
        let s = golden();
        let h_poly = TrigPoly::cosine(1, 1.0).add(&TrigPoly::sine(2, 0.5));
        let dm = coboundary_conformal_density(&h_poly, &s, 1.7, 1 << 12).unwrap();
        let f = Potential::coboundary(Potential::TrigPoly(h_poly));
        let sol = solve_cocycle(&s, &Point::circle(0.0), &f, 1.7, 512).unwrap();
        let est = invariant_from_cocycle(MeasureRef::Density(&dm), &sol).unwrap();
        assert_eq!(est.trend, MassTrend::Finite, "{est:?}");
        assert!(est.mass_checkpoints.last().unwrap().1 > 0.0);
        assert!(
            est.invariance_residual < 1e-12,
            "residual {:e}",
            est.invariance_residual
        );
    }
}
