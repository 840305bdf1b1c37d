//! Sawtooth potentials on an irrational rotation with uniformly bounded
//! orbit sums at rotation return times.
//!
//! Level k lays a 1/q_k-periodic train of triangular teeth of height
//! 2^{k+1}, half-width 1/(k·2^k·q_k) and slope L_k = k·2^{2k+1}·q_k,
//! where q_k is the first continued-fraction denominator of α above the
//! threshold k³·2^{2k+1}·n_2⋯n_k. The potential is the telescoping sum
//! F(x) = Σ_k [ω_k(x) − ω_k(x+α)], so its Birkhoff sums collapse to
//! S_n(x) = Σ_k [ω_k(x) − ω_k(x+nα)]; at the recorded return times n_j
//! (where the orbit of 0 re-enters [0, ε_{j-1}]) every level is
//! Lipschitz-controlled and |S_{n_j}| ≤ Σ_{k} 1/k² uniformly, even
//! though F itself is badly unbounded level by level.
//!
//! Levels get geometrically finer: with f64 coordinates only K ≤ 2 is
//! resolvable, exact-rational coordinates support K = 3, and K ≥ 4 is
//! rejected outright (the next return-time search leaves feasible
//! integer ranges).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dynsys::{frac, frac_rational, DynSystem, Point, Rotation};
use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::potential::Potential;

/// Coordinate arithmetic the potential is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Float,
    Exact,
}

/// Hard cap on return-time scans.
const RETURN_SCAN_CAP: u64 = 50_000_000;
/// Tooth trains finer than this cannot be enumerated for quadrature.
const QUADRATURE_Q_CAP: u64 = 5_000_000;

#[derive(Clone, Debug)]
struct SawtoothLevel {
    k: u32,
    /// Tooth count: continued-fraction denominator q_k.
    q: u64,
    /// Matching numerator p_k.
    p: u64,
    /// Threshold q_k was required to clear.
    threshold: u64,
    /// Tooth height 2^{k+1}.
    height: f64,
    /// Slope divided by q: k·2^{2k+1} (the tooth profile in the
    /// rescaled coordinate y = frac(q·x)).
    slope_over_q: u64,
    /// ε_k as a unit fraction 1/epsilon_inv (the running minimum of
    /// 1/(k²·L_k) is always a unit fraction).
    epsilon_inv: u128,
}

impl SawtoothLevel {
    fn half_width(&self) -> f64 {
        // height / slope = 2^{k+1} / (k·2^{2k+1}·q) = 1/(k·2^k·q)
        1.0 / (self.k as f64 * 2f64.powi(self.k as i32) * self.q as f64)
    }

    fn slope(&self) -> f64 {
        self.slope_over_q as f64 * self.q as f64
    }

    fn omega_f64(&self, x: f64) -> f64 {
        let y = frac(x * self.q as f64);
        let m = y.min(1.0 - y);
        (self.height - self.slope_over_q as f64 * m).max(0.0)
    }

    fn omega_exact(&self, x: &BigRational) -> BigRational {
        let u = x * BigRational::from(BigInt::from(self.q));
        let y = frac_rational(&u);
        let m = if y <= BigRational::one() - &y {
            y
        } else {
            BigRational::one() - y
        };
        let v = BigRational::from(BigInt::from(1u64 << (self.k + 1)))
            - BigRational::from(BigInt::from(self.slope_over_q)) * m;
        if v.is_positive() {
            v
        } else {
            BigRational::zero()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SawtoothLevelRecord {
    pub k: u32,
    pub denominator: u64,
    pub numerator: u64,
    pub threshold: u64,
    /// |α − p/q| (computed in exact rational arithmetic).
    pub diophantine_residual: f64,
    /// The guaranteed bound 1/(threshold·q).
    pub diophantine_bound: f64,
    pub height: f64,
    pub half_width: f64,
    pub slope: f64,
    pub epsilon: f64,
    /// ∫ω_k dλ, exactly 2/k by construction.
    pub tooth_integral: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SawtoothCertificate {
    pub alpha: f64,
    pub k_levels: u32,
    pub precision: Precision,
    pub levels: Vec<SawtoothLevelRecord>,
    /// Return times n_1 < n_2 < … < n_K (n_1 = 1).
    pub return_times: Vec<u64>,
    /// n_{K+1}, when it lies within feasible scan range.
    pub one_past_return: Option<u64>,
    /// Σ_{k<=K} 1/k²: uniform bound on |S_n| at certified return times.
    pub return_sum_bound: f64,
    /// Σ_{k>K} 1/k²: what the omitted ideal levels could add to those
    /// orbit sums.
    pub ideal_tail_bound: f64,
    /// Max |S_{n_{K+1}}| over a fixed 4096-point grid, when available;
    /// must sit under `return_sum_bound`.
    pub return_sup_sample: Option<f64>,
}

/// The built potential. Construct through [`build_appendix_b`].
#[derive(Clone, Debug)]
pub struct SawtoothPotential {
    rotation: Rotation,
    precision: Precision,
    levels: Vec<SawtoothLevel>,
    return_times: Vec<u64>,
    one_past_return: Option<u64>,
    certificate: SawtoothCertificate,
}

impl SawtoothPotential {
    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn k_levels(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn certificate(&self) -> &SawtoothCertificate {
        &self.certificate
    }

    pub fn return_times(&self) -> &[u64] {
        &self.return_times
    }

    pub fn one_past_return(&self) -> Option<u64> {
        self.one_past_return
    }

    /// Σ_{k<=K} 1/k².
    pub fn return_sum_bound(&self) -> f64 {
        self.levels.iter().map(|l| 1.0 / (l.k as f64).powi(2)).sum()
    }

    /// Σ_{k>K} 1/k² = π²/6 − Σ_{k<=K} 1/k².
    pub fn ideal_tail_bound(&self) -> f64 {
        std::f64::consts::PI.powi(2) / 6.0 - self.return_sum_bound()
    }

    /// Tooth function of one level (1-based k).
    pub fn omega(&self, k: u32, x: &Point) -> Result<f64> {
        let level = self
            .levels
            .iter()
            .find(|l| l.k == k)
            .ok_or_else(|| Error::Config {
                field: "k".into(),
                detail: format!("no level {k}; built levels are 1..={}", self.k_levels()),
            })?;
        match self.circle_coord(x)? {
            EvalCoord::Float(v) => Ok(level.omega_f64(v)),
            EvalCoord::Exact(r) => Ok(level.omega_exact(&r).to_f64().unwrap_or(f64::NAN)),
        }
    }

    /// F(x) = Σ_k [ω_k(x) − ω_k(x+α)].
    pub fn eval(&self, x: &Point) -> Result<f64> {
        match self.circle_coord(x)? {
            EvalCoord::Float(v) => {
                let shifted = frac(v + self.rotation.alpha());
                let mut acc = CompensatedSum::new();
                for l in &self.levels {
                    acc.add(l.omega_f64(v));
                    acc.add(-l.omega_f64(shifted));
                }
                Ok(acc.value())
            }
            EvalCoord::Exact(r) => {
                let shifted = frac_rational(&(&r + self.rotation.alpha_exact()));
                let mut total = BigRational::zero();
                for l in &self.levels {
                    total += l.omega_exact(&r) - l.omega_exact(&shifted);
                }
                Ok(total.to_f64().unwrap_or(f64::NAN))
            }
        }
    }

    /// Telescoped Birkhoff sum S_n(x) = Σ_k [ω_k(x) − ω_k(x + nα)];
    /// exact identity for every n >= 0, no walking involved.
    pub fn return_sum(&self, x: &Point, n: u64) -> Result<f64> {
        match self.circle_coord(x)? {
            EvalCoord::Float(v) => {
                let shifted = frac(v + n as f64 * self.rotation.alpha());
                let mut acc = CompensatedSum::new();
                for l in &self.levels {
                    acc.add(l.omega_f64(v));
                    acc.add(-l.omega_f64(shifted));
                }
                Ok(acc.value())
            }
            EvalCoord::Exact(r) => {
                let shift = self.rotation.alpha_exact() * BigRational::from(BigInt::from(n));
                let shifted = frac_rational(&(&r + shift));
                let mut total = BigRational::zero();
                for l in &self.levels {
                    total += l.omega_exact(&r) - l.omega_exact(&shifted);
                }
                Ok(total.to_f64().unwrap_or(f64::NAN))
            }
        }
    }

    /// Breakpoint-exact trapezoid quadrature of ∫ω_k dλ; agrees with the
    /// closed form 2/k up to rounding. Errors when the tooth train is
    /// too fine to enumerate.
    pub fn tooth_integral_quadrature(&self, k: u32) -> Result<f64> {
        let level = self
            .levels
            .iter()
            .find(|l| l.k == k)
            .ok_or_else(|| Error::Config {
                field: "k".into(),
                detail: format!("no level {k}"),
            })?;
        if level.q > QUADRATURE_Q_CAP {
            return Err(Error::PrecisionExceeded {
                mode: "quadrature".into(),
                detail: format!("level {k} has {} teeth", level.q),
                advice: "use the closed-form integral 2/k".into(),
            });
        }
        let mut breaks = Vec::with_capacity(3 * level.q as usize + 3);
        push_tooth_breaks(&mut breaks, level, 0.0);
        Ok(integrate_piecewise(&mut breaks, |x| level.omega_f64(x)))
    }

    /// Breakpoint-exact trapezoid quadrature of ∫F dλ (the exact value
    /// is 0: every level contributes ω_k and −ω_k∘φ with equal mass).
    pub fn mean_quadrature(&self) -> Result<f64> {
        let total_teeth: u64 = self.levels.iter().map(|l| l.q).sum();
        if self.levels.iter().any(|l| l.q > QUADRATURE_Q_CAP) || total_teeth > QUADRATURE_Q_CAP {
            return Err(Error::PrecisionExceeded {
                mode: "quadrature".into(),
                detail: format!("{total_teeth} teeth in total"),
                advice: "use the closed-form mean 0".into(),
            });
        }
        let alpha = self.rotation.alpha();
        let mut breaks = Vec::with_capacity(6 * total_teeth as usize + 12);
        for level in &self.levels {
            push_tooth_breaks(&mut breaks, level, 0.0);
            push_tooth_breaks(&mut breaks, level, -alpha);
        }
        let levels = &self.levels;
        Ok(integrate_piecewise(&mut breaks, |x| {
            let shifted = frac(x + alpha);
            levels
                .iter()
                .map(|l| l.omega_f64(x) - l.omega_f64(shifted))
                .sum()
        }))
    }

    fn circle_coord(&self, x: &Point) -> Result<EvalCoord> {
        let coord = match x {
            Point::Circle(c) => c,
            other => {
                return Err(Error::SpaceMismatch {
                    context: "sawtooth potential eval",
                    expected: "circle",
                    got: other.space_name(),
                })
            }
        };
        Ok(match (self.precision, coord) {
            (Precision::Float, c) => EvalCoord::Float(c.as_f64()),
            (Precision::Exact, crate::dynsys::CircleCoord::Exact(r)) => EvalCoord::Exact(r.clone()),
            (Precision::Exact, crate::dynsys::CircleCoord::Float(f)) => EvalCoord::Exact(
                BigRational::from_float(*f).expect("finite circle coordinate"),
            ),
        })
    }
}

enum EvalCoord {
    Float(f64),
    Exact(BigRational),
}

fn push_tooth_breaks(breaks: &mut Vec<f64>, level: &SawtoothLevel, offset: f64) {
    let w = level.half_width();
    let q = level.q;
    for j in 0..q {
        let c = j as f64 / q as f64 + offset;
        breaks.push(frac(c - w));
        breaks.push(frac(c));
        breaks.push(frac(c + w));
    }
}

/// Trapezoid over every linear piece: exact for piecewise-linear f when
/// `breaks` contains all kinks.
fn integrate_piecewise(breaks: &mut Vec<f64>, f: impl Fn(f64) -> f64) -> f64 {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut acc = CompensatedSum::new();
    let mut prev_x = breaks[0];
    let mut prev_v = f(prev_x);
    for &x in breaks.iter().skip(1) {
        let v = f(x);
        acc.add((x - prev_x) * 0.5 * (prev_v + v));
        prev_x = x;
        prev_v = v;
    }
    // wrap segment back to the first breakpoint
    let x0 = breaks[0];
    acc.add((x0 + 1.0 - prev_x) * 0.5 * (prev_v + f(x0)));
    acc.value()
}

/// Smallest n > start with frac(n·α) <= 1/epsilon_inv, f64 scan.
fn scan_return_f64(alpha: f64, start: u64, epsilon_inv: u128) -> Result<u64> {
    let eps = 1.0 / epsilon_inv as f64;
    let mut n = start;
    loop {
        n += 1;
        if n > RETURN_SCAN_CAP {
            return Err(Error::PrecisionExceeded {
                mode: "float".into(),
                detail: format!("no return below {RETURN_SCAN_CAP} with gap 1/{epsilon_inv}"),
                advice: "reduce the level count".into(),
            });
        }
        if frac(n as f64 * alpha) <= eps {
            return Ok(n);
        }
    }
}

/// Same scan in exact arithmetic over the high-precision approximant
/// P/Q: walk r_n = n·P mod Q incrementally and compare to floor(Q/inv).
fn scan_return_exact(rotation: &Rotation, start: u64, epsilon_inv: u128) -> Result<u64> {
    let approx = rotation.alpha_exact();
    let p = approx.numer().clone();
    let q = approx.denom().clone();
    let thresh = &q / BigInt::from(epsilon_inv);
    let mut r = (BigInt::from(start) * &p) % &q;
    let mut n = start;
    loop {
        n += 1;
        if n > RETURN_SCAN_CAP {
            return Err(Error::PrecisionExceeded {
                mode: "exact".into(),
                detail: format!("no return below {RETURN_SCAN_CAP} with gap 1/{epsilon_inv}"),
                advice: "reduce the level count".into(),
            });
        }
        r += &p;
        if r >= q {
            r -= &q;
        }
        if r <= thresh {
            return Ok(n);
        }
    }
}

/// Construct a sawtooth potential with `k_levels` levels.
pub fn build_appendix_b(
    system: &DynSystem,
    k_levels: u32,
    precision: Precision,
) -> Result<Potential> {
    let rotation = match system {
        DynSystem::Rotation(r) => r.clone(),
        _ => {
            return Err(Error::CriterionInapplicable(
                "sawtooth construction requires a standard irrational rotation".into(),
            ))
        }
    };
    if k_levels == 0 {
        return Err(Error::ConstraintViolation {
            condition: "level count".into(),
            detail: "need at least one level".into(),
        });
    }
    match precision {
        Precision::Float if k_levels > 2 => {
            return Err(Error::PrecisionExceeded {
                mode: "float".into(),
                detail: format!(
                    "{k_levels} levels need tooth widths below f64 resolution"
                ),
                advice: "use exact precision (supports up to 3 levels)".into(),
            })
        }
        Precision::Exact if k_levels > 3 => {
            return Err(Error::PrecisionExceeded {
                mode: "exact".into(),
                detail: format!(
                    "{k_levels} levels push return-time searches past feasible integer ranges"
                ),
                advice: "at most 3 levels are constructible".into(),
            })
        }
        _ => {}
    }

    let alpha = rotation.alpha();
    let mut levels: Vec<SawtoothLevel> = Vec::with_capacity(k_levels as usize);
    let mut return_times: Vec<u64> = vec![1];
    let mut epsilon_inv: u128 = 1; // ε_0 = 1 (any gap qualifies)

    for k in 1..=k_levels {
        let n_product: u128 = return_times.iter().skip(1).map(|&n| n as u128).product();
        let threshold: u128 = (k as u128).pow(3) * (1u128 << (2 * k + 1)) * n_product;
        let threshold: u64 = u64::try_from(threshold).map_err(|_| Error::PrecisionExceeded {
            mode: format!("{precision:?}").to_lowercase(),
            detail: format!("level {k} threshold exceeds u64"),
            advice: "reduce the level count".into(),
        })?;
        let mut found = None;
        for (pk, qk) in rotation.number().convergents() {
            if qk >= BigInt::from(threshold) {
                let q_u64 = qk.to_u64().ok_or_else(|| Error::PrecisionExceeded {
                    mode: format!("{precision:?}").to_lowercase(),
                    detail: format!("level {k} denominator exceeds u64"),
                    advice: "reduce the level count".into(),
                })?;
                let p_u64 = pk.to_u64().expect("numerator below denominator");
                found = Some((p_u64, q_u64));
                break;
            }
        }
        let (p, q) = found.expect("convergent denominators grow without bound");

        // |α − p/q| <= 1/(threshold·q) is guaranteed by q >= threshold
        // and the convergent bound 1/(q·q_next); verify it anyway in
        // exact rational arithmetic.
        let residual_exact =
            (rotation.alpha_exact() - BigRational::new(BigInt::from(p), BigInt::from(q))).abs();
        let bound = BigRational::new(
            BigInt::one(),
            BigInt::from(threshold) * BigInt::from(q),
        );
        if residual_exact > bound {
            return Err(Error::ConstraintViolation {
                condition: format!("Diophantine bound, level {k}"),
                detail: format!(
                    "|α − {p}/{q}| = {:.3e} exceeds 1/(threshold·q) = {:.3e}",
                    residual_exact.to_f64().unwrap_or(f64::NAN),
                    bound.to_f64().unwrap_or(f64::NAN)
                ),
            });
        }

        let slope_over_q: u64 = (k as u64) << (2 * k + 1);
        let l_k: u128 = slope_over_q as u128 * q as u128;
        epsilon_inv = epsilon_inv.max((k as u128).pow(2) * l_k);
        levels.push(SawtoothLevel {
            k,
            q,
            p,
            threshold,
            height: 2f64.powi(k as i32 + 1),
            slope_over_q,
            epsilon_inv,
        });

        // Return time n_{k+1}: needed as construction input for level
        // k+1, and recorded as the certified sum horizon past level K
        // when the scan stays feasible.
        let need_next = k < k_levels;
        let feasible = epsilon_inv <= RETURN_SCAN_CAP as u128;
        if need_next || feasible {
            let start = *return_times.last().unwrap();
            let n_next = match precision {
                Precision::Float => scan_return_f64(alpha, start, epsilon_inv)?,
                Precision::Exact => scan_return_exact(&rotation, start, epsilon_inv)?,
            };
            return_times.push(n_next);
        }
    }

    let one_past_return = if return_times.len() as u32 > k_levels {
        return_times.pop()
    } else {
        None
    };

    let mut pot = SawtoothPotential {
        rotation,
        precision,
        levels,
        return_times,
        one_past_return,
        certificate: SawtoothCertificate {
            alpha,
            k_levels,
            precision,
            levels: Vec::new(),
            return_times: Vec::new(),
            one_past_return,
            return_sum_bound: 0.0,
            ideal_tail_bound: 0.0,
            return_sup_sample: None,
        },
    };
    pot.certificate.return_times = pot.return_times.clone();
    pot.certificate.return_sum_bound = pot.return_sum_bound();
    pot.certificate.ideal_tail_bound = pot.ideal_tail_bound();
    pot.certificate.levels = pot
        .levels
        .iter()
        .map(|l| {
            let residual = (pot.rotation.alpha_exact()
                - BigRational::new(BigInt::from(l.p), BigInt::from(l.q)))
            .abs()
            .to_f64()
            .unwrap_or(f64::NAN);
            SawtoothLevelRecord {
                k: l.k,
                denominator: l.q,
                numerator: l.p,
                threshold: l.threshold,
                diophantine_residual: residual,
                diophantine_bound: 1.0 / (l.threshold as f64 * l.q as f64),
                height: l.height,
                half_width: l.half_width(),
                slope: l.slope(),
                epsilon: 1.0 / l.epsilon_inv as f64,
                tooth_integral: 2.0 / l.k as f64,
            }
        })
        .collect();

    if let Some(n_past) = pot.one_past_return {
        let grid = 4096usize;
        let mut sup = 0.0f64;
        for i in 0..grid {
            let x = match precision {
                Precision::Float => Point::circle(i as f64 / grid as f64),
                Precision::Exact => Point::circle_exact(BigRational::new(
                    BigInt::from(i),
                    BigInt::from(grid),
                )),
            };
            sup = sup.max(pot.return_sum(&x, n_past)?.abs());
        }
        pot.certificate.return_sup_sample = Some(sup);
        if sup > pot.return_sum_bound() {
            return Err(Error::ConstraintViolation {
                condition: "return-time sum bound".into(),
                detail: format!(
                    "sampled sup {sup:.6} exceeds the certified bound {:.6}",
                    pot.return_sum_bound()
                ),
            });
        }
    }

    Ok(Potential::AppendixB(std::sync::Arc::new(pot)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::RotationNumber;

    fn golden() -> DynSystem {
        DynSystem::rotation(RotationNumber::golden())
    }

    fn build(k: u32, precision: Precision) -> std::sync::Arc<SawtoothPotential> {
        match build_appendix_b(&golden(), k, precision).unwrap() {
            Potential::AppendixB(s) => s,
            other => panic!("unexpected potential kind {other:?}"),
        }
    }

    #[test]
    fn one_level_matches_hand_values() {
        let s = build(1, Precision::Float);
        let cert = s.certificate();
        assert_eq!(cert.levels[0].denominator, 8);
        assert_eq!(cert.levels[0].numerator, 5);
        assert_eq!(cert.levels[0].slope, 64.0);
        assert_eq!(cert.levels[0].height, 4.0);
        assert_eq!(s.return_times(), &[1]);
        assert_eq!(s.one_past_return(), Some(34));
        // x = 0 is a tooth center; α lands inside the tooth at 5/8.
        let f0 = s.eval(&Point::circle(0.0)).unwrap();
        assert!(
            (f0 - 0.44582472000672971).abs() < 1e-12,
            "F(0) = {f0}"
        );
        let omega_alpha = s.omega(1, &Point::circle(s.rotation().alpha())).unwrap();
        assert!((4.0 - omega_alpha - f0).abs() < 1e-12);
    }

    #[test]
    fn two_level_geometry_and_return_times() {
        let s = build(2, Precision::Float);
        let cert = s.certificate();
        assert_eq!(cert.levels[0].denominator, 8);
        assert_eq!(cert.levels[1].denominator, 10946);
        assert_eq!(cert.levels[1].threshold, 8704);
        assert_eq!(s.return_times(), &[1, 34]);
        assert_eq!(s.one_past_return(), Some(1_346_269));
        assert!((cert.levels[1].half_width - 1.1419696692855838e-05).abs() < 1e-18);
        assert!((s.return_sum_bound() - 1.25).abs() < 1e-15);
        assert!((s.ideal_tail_bound() - 0.39493406684822646).abs() < 1e-15);
        for lvl in &cert.levels {
            assert!(lvl.diophantine_residual <= lvl.diophantine_bound);
        }
        let sup = cert.return_sup_sample.unwrap();
        assert!(sup <= 1.25 && sup > 0.0, "sup sample {sup}");
    }

    #[test]
    fn tooth_integrals_match_closed_form() {
        let s = build(2, Precision::Float);
        for k in 1..=2u32 {
            let quad = s.tooth_integral_quadrature(k).unwrap();
            assert!(
                (quad - 2.0 / k as f64).abs() < 1e-9,
                "level {k}: {quad} vs {}",
                2.0 / k as f64
            );
        }
        let mean = s.mean_quadrature().unwrap();
        assert!(mean.abs() < 1e-9, "mean {mean:e}");
    }

    #[test]
    fn telescoped_sums_match_direct_birkhoff_walk() {
        let s = build(2, Precision::Float);
        let sys = golden();
        let pot = Potential::AppendixB(s.clone());
        for &x0 in &[0.0, 0.1234, 0.61803, 0.95] {
            let n = 34u64;
            let telescoped = s.return_sum(&Point::circle(x0), n).unwrap();
            let direct =
                crate::birkhoff::birkhoff_sum(&sys, &pot, &Point::circle(x0), n as i64).unwrap();
            assert!(
                (telescoped - direct).abs() < 1e-9,
                "x={x0}: telescoped {telescoped} vs direct {direct}"
            );
        }
    }

    #[test]
    fn return_sums_at_certified_times_stay_bounded() {
        let s = build(2, Precision::Float);
        let n_past = s.one_past_return().unwrap();
        let bound = s.return_sum_bound() + 1e-9;
        for i in 0..2000 {
            let x = Point::circle(i as f64 / 2000.0);
            let v = s.return_sum(&x, n_past).unwrap();
            assert!(v.abs() <= bound, "x={i}/2000: |S| = {} > {bound}", v.abs());
        }
    }

    #[test]
    fn precision_gates() {
        assert!(matches!(
            build_appendix_b(&golden(), 3, Precision::Float),
            Err(Error::PrecisionExceeded { .. })
        ));
        assert!(matches!(
            build_appendix_b(&golden(), 4, Precision::Exact),
            Err(Error::PrecisionExceeded { .. })
        ));
        assert!(build_appendix_b(&golden(), 0, Precision::Float).is_err());
        assert!(build_appendix_b(&DynSystem::squaring(), 1, Precision::Float).is_err());
    }

    #[test]
    fn exact_three_level_build() {
        let s = build(3, Precision::Exact);
        let cert = s.certificate();
        assert_eq!(s.return_times(), &[1, 34, 1_346_269]);
        assert_eq!(cert.levels[2].denominator, 225_851_433_717);
        assert_eq!(cert.levels[2].numerator, 139_583_862_445);
        assert_eq!(cert.levels[2].threshold, 158_191_992_576);
        assert!(s.one_past_return().is_none());
        let eps3 = cert.levels[2].epsilon;
        assert!((eps3 - 1.281160128540163e-15).abs() / eps3 < 1e-12);
        let res3 = cert.levels[2].diophantine_residual;
        assert!((res3 - 8.76736917555316e-24).abs() / res3 < 1e-9);
        assert!(res3 <= cert.levels[2].diophantine_bound);
    }

    #[test]
    fn exact_and_float_agree_on_coarse_levels() {
        let sf = build(2, Precision::Float);
        let se = build(2, Precision::Exact);
        for &x in &[0.0, 0.125, 0.3333333333333333, 0.875, 0.99] {
            let vf = sf.eval(&Point::circle(x)).unwrap();
            let ve = se.eval(&Point::circle(x)).unwrap();
            assert!((vf - ve).abs() < 1e-9, "x={x}: float {vf} vs exact {ve}");
        }
    }

    #[test]
    fn certificate_serializes_to_json() {
        let s = build(1, Precision::Float);
        let text = serde_json::to_string(s.certificate()).unwrap();
        assert!(text.contains("return_times"));
    }
}
