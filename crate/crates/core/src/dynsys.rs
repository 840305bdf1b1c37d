//! State spaces and the homeomorphisms that drive everything else:
//! irrational circle rotations (continued-fraction data), finite cyclic
//! permutations, the squaring map on [0,1], and rotations conjugated by
//! a user-supplied circle homeomorphism.
//!
//! Circle coordinates come in two precisions: plain `f64` reduced to
//! [0,1), and arbitrary-precision rationals for runs that need orbit
//! geometry below f64 resolution. Exact coordinates step by a cached
//! rational approximant of the rotation number whose error is below
//! 1e-60, so orbit positions stay trustworthy far past any horizon this
//! crate walks.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Fractional part in [0,1); wraps negatives.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Arc-length distance on the circle: min(|x−y| mod 1, 1 − |x−y| mod 1).
#[inline]
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = frac(x - y);
    d.min(1.0 - d)
}

pub(crate) fn frac_rational(x: &BigRational) -> BigRational {
    let f = x - x.floor();
    debug_assert!(!f.is_negative() && f < BigRational::one());
    f
}

// ---------------------------------------------------------------------------
// Rotation numbers
// ---------------------------------------------------------------------------

/// An irrational rotation number in (0,1), given by its continued
/// fraction [0; a_1, a_2, ...] as a finite head followed by a repeating
/// tail. A non-empty repeating tail forces a quadratic irrational, so
/// rationals are unrepresentable by construction; the constructor also
/// rejects empty tails and zero partial quotients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RotationNumber {
    head: Vec<u64>,
    tail: Vec<u64>,
    name: Option<&'static str>,
}

impl RotationNumber {
    /// (√5 − 1)/2 = [0; 1, 1, 1, ...] ≈ 0.6180339887498949.
    pub fn golden() -> Self {
        Self {
            head: Vec::new(),
            tail: vec![1],
            name: Some("golden"),
        }
    }

    /// √2 − 1 = [0; 2, 2, 2, ...] ≈ 0.41421356237309503.
    pub fn silver() -> Self {
        Self {
            head: Vec::new(),
            tail: vec![2],
            name: Some("silver"),
        }
    }

    /// General quadratic irrational [0; head..., (tail...) repeating].
    pub fn quadratic(head: Vec<u64>, tail: Vec<u64>) -> Result<Self> {
        if tail.is_empty() {
            return Err(Error::RationalRotation(
                "a finite continued fraction is a rational number; declare a non-empty repeating tail".into(),
            ));
        }
        if head.iter().chain(&tail).any(|&a| a == 0) {
            return Err(Error::RationalRotation(
                "partial quotients must be >= 1".into(),
            ));
        }
        Ok(Self {
            head,
            tail,
            name: None,
        })
    }

    pub fn name(&self) -> Option<&'static str> {
        self.name
    }

    /// Partial quotient a_i for i >= 1.
    pub fn partial_quotient(&self, i: usize) -> u64 {
        assert!(i >= 1, "partial quotients are indexed from 1");
        let j = i - 1;
        if j < self.head.len() {
            self.head[j]
        } else {
            self.tail[(j - self.head.len()) % self.tail.len()]
        }
    }

    /// Convergent numerators/denominators p_k/q_k, k = 1, 2, ...
    /// Satisfies |α − p_k/q_k| < 1/(q_k q_{k+1}) < 1/q_k².
    pub fn convergents(&self) -> Convergents<'_> {
        Convergents {
            number: self,
            k: 0,
            p_prev: (BigInt::one(), BigInt::zero()),
            q_prev: (BigInt::zero(), BigInt::one()),
        }
    }

    /// Value to full f64 precision (convergents iterated past 2^-60).
    pub fn value(&self) -> f64 {
        let mut it = self.convergents();
        let mut last = it.next().expect("at least one convergent");
        for (p, q) in it {
            // q_k q_{k+1} > 2^60 pins the error below f64 resolution.
            if &last.1 * &q > BigInt::from(1u64) << 62 {
                last = (p, q);
                break;
            }
            last = (p, q);
        }
        let p = last.0.to_f64().expect("convergent numerator fits f64");
        let q = last.1.to_f64().expect("convergent denominator fits f64");
        p / q
    }

    /// Rational approximant p/q with q >= min_denominator, so the
    /// approximation error is below 1/min_denominator².
    pub fn approximant(&self, min_denominator: &BigInt) -> BigRational {
        for (p, q) in self.convergents() {
            if &q >= min_denominator {
                return BigRational::new(p, q);
            }
        }
        unreachable!("convergent denominators grow without bound")
    }
}

/// Iterator over continued-fraction convergents (p_k, q_k), k >= 1.
pub struct Convergents<'a> {
    number: &'a RotationNumber,
    k: usize,
    p_prev: (BigInt, BigInt), // (p_{k-2}, p_{k-1}) with seeds p_{-1}=1, p_0=0
    q_prev: (BigInt, BigInt), // (q_{k-2}, q_{k-1}) with seeds q_{-1}=0, q_0=1
}

impl Iterator for Convergents<'_> {
    type Item = (BigInt, BigInt);

    fn next(&mut self) -> Option<(BigInt, BigInt)> {
        self.k += 1;
        let a = BigInt::from(self.number.partial_quotient(self.k));
        let p = &a * &self.p_prev.1 + &self.p_prev.0;
        let q = &a * &self.q_prev.1 + &self.q_prev.0;
        self.p_prev = (std::mem::replace(&mut self.p_prev.1, p.clone()), p.clone());
        self.q_prev = (std::mem::replace(&mut self.q_prev.1, q.clone()), q.clone());
        Some((p, q))
    }
}

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// A circle coordinate in [0,1), float or exact-rational.
#[derive(Clone, Debug, PartialEq)]
pub enum CircleCoord {
    Float(f64),
    Exact(BigRational),
}

impl CircleCoord {
    pub fn as_f64(&self) -> f64 {
        match self {
            CircleCoord::Float(x) => *x,
            CircleCoord::Exact(r) => r.to_f64().expect("reduced coordinate fits f64"),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, CircleCoord::Exact(_))
    }
}

/// A point of one of the supported state spaces.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    /// Circle R/Z, coordinate reduced to [0,1).
    Circle(CircleCoord),
    /// Unit interval [0,1] (squaring-map state space).
    Interval(f64),
    /// Finite cycle {1, ..., p}, 1-based index.
    Cycle { period: u32, index: u32 },
}

impl Point {
    /// Circle point from any real; reduced mod 1.
    pub fn circle(x: f64) -> Self {
        Point::Circle(CircleCoord::Float(frac(x)))
    }

    /// Exact circle point; reduced mod 1.
    pub fn circle_exact(r: BigRational) -> Self {
        Point::Circle(CircleCoord::Exact(frac_rational(&r)))
    }

    pub fn interval(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidCoordinate {
                space: "interval",
                detail: format!("{x} outside [0,1]"),
            });
        }
        Ok(Point::Interval(x))
    }

    pub fn cycle(period: u32, index: u32) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidCoordinate {
                space: "cycle",
                detail: "period must be >= 1".into(),
            });
        }
        if index < 1 || index > period {
            return Err(Error::InvalidCoordinate {
                space: "cycle",
                detail: format!("index {index} outside 1..={period}"),
            });
        }
        Ok(Point::Cycle { period, index })
    }

    /// Numeric coordinate: circle/interval value, or the 1-based cycle
    /// index as a float (used by report writers).
    pub fn as_f64(&self) -> f64 {
        match self {
            Point::Circle(c) => c.as_f64(),
            Point::Interval(x) => *x,
            Point::Cycle { index, .. } => f64::from(*index),
        }
    }

    pub fn space_name(&self) -> &'static str {
        match self {
            Point::Circle(_) => "circle",
            Point::Interval(_) => "interval",
            Point::Cycle { .. } => "cycle",
        }
    }
}

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Irrational rotation x ↦ x + α mod 1.
#[derive(Clone, Debug)]
pub struct Rotation {
    number: RotationNumber,
    alpha: f64,
    alpha_exact: OnceLock<BigRational>,
}

impl Rotation {
    pub fn new(number: RotationNumber) -> Self {
        let alpha = number.value();
        Self {
            number,
            alpha,
            alpha_exact: OnceLock::new(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn number(&self) -> &RotationNumber {
        &self.number
    }

    /// Rational stand-in for α with error < 1e-60, used to step exact
    /// coordinates. (Denominator >= 1e30, so 1/q² < 1e-60.)
    pub fn alpha_exact(&self) -> &BigRational {
        self.alpha_exact.get_or_init(|| {
            let min_q = BigInt::from(10u32).pow(30);
            self.number.approximant(&min_q)
        })
    }
}

type CircleMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// φ = h ∘ R_α ∘ h⁻¹ for a strictly increasing circle homeomorphism h.
#[derive(Clone)]
pub struct ConjugatedRotation {
    rotation: Rotation,
    h: CircleMap,
    h_inv: CircleMap,
    label: String,
}

impl fmt::Debug for ConjugatedRotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConjugatedRotation")
            .field("rotation", &self.rotation)
            .field("label", &self.label)
            .finish()
    }
}

impl ConjugatedRotation {
    pub fn new(
        number: RotationNumber,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        h_inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        Self {
            rotation: Rotation::new(number),
            h: Arc::new(h),
            h_inv: Arc::new(h_inv),
            label: label.into(),
        }
    }

    /// Built-in warp family h(x) = x + a·sin(2πx)/(2π), |a| < 1, a
    /// strictly increasing homeomorphism fixing 0. The inverse is solved
    /// by Newton iteration to machine precision.
    pub fn sine_warp(number: RotationNumber, a: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&a) {
            return Err(Error::InvalidCoordinate {
                space: "circle",
                detail: format!("warp amplitude {a} outside (-1,1); h would not be increasing"),
            });
        }
        let tau = std::f64::consts::TAU;
        let h = move |x: f64| frac(x + a * (tau * x).sin() / tau);
        let h_inv = move |y: f64| {
            // solve h(x) = y; h' = 1 + a cos(2πx) >= 1-|a| > 0
            let mut x = y;
            for _ in 0..60 {
                let fx = x + a * (tau * x).sin() / tau - y;
                let dfx = 1.0 + a * (tau * x).cos();
                let step = fx / dfx;
                x -= step;
                if step.abs() < 1e-17 {
                    break;
                }
            }
            frac(x)
        };
        Ok(Self::new(
            number,
            h,
            h_inv,
            format!("sine_warp(a={a})"),
        ))
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// One of the supported dynamical systems.
#[derive(Clone, Debug)]
pub enum DynSystem {
    Rotation(Rotation),
    FiniteCycle { period: u32 },
    SquaringMap,
    ConjugatedRotation(ConjugatedRotation),
}

impl DynSystem {
    pub fn rotation(number: RotationNumber) -> Self {
        DynSystem::Rotation(Rotation::new(number))
    }

    pub fn finite_cycle(period: u32) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidCoordinate {
                space: "cycle",
                detail: "period must be >= 1".into(),
            });
        }
        Ok(DynSystem::FiniteCycle { period })
    }

    pub fn squaring() -> Self {
        DynSystem::SquaringMap
    }

    pub fn space_name(&self) -> &'static str {
        match self {
            DynSystem::Rotation(_) | DynSystem::ConjugatedRotation(_) => "circle",
            DynSystem::FiniteCycle { .. } => "cycle",
            DynSystem::SquaringMap => "interval",
        }
    }

    /// Every orbit dense?
    pub fn is_minimal(&self) -> bool {
        !matches!(self, DynSystem::SquaringMap)
    }

    /// Exactly one invariant Borel probability measure?
    pub fn is_uniquely_ergodic(&self) -> bool {
        !matches!(self, DynSystem::SquaringMap)
    }

    /// Is the invariant measure available in closed form? (Lebesgue for
    /// rotations, uniform for cycles, point masses at 0 and 1 for the
    /// squaring map; a conjugated rotation's pushforward density is not
    /// exposed by the callable interface.)
    pub fn invariant_measure_known(&self) -> bool {
        !matches!(self, DynSystem::ConjugatedRotation(_))
    }

    fn check_space(&self, x: &Point, context: &'static str) -> Result<()> {
        if x.space_name() != self.space_name() {
            return Err(Error::SpaceMismatch {
                context,
                expected: self.space_name(),
                got: x.space_name(),
            });
        }
        if let (DynSystem::FiniteCycle { period }, Point::Cycle { period: p, .. }) = (self, x) {
            if p != period {
                return Err(Error::SpaceMismatch {
                    context,
                    expected: "cycle of matching period",
                    got: "cycle of different period",
                });
            }
        }
        Ok(())
    }

    /// One application of φ (forward) or φ⁻¹ (backward).
    pub fn step(&self, x: &Point, dir: Direction) -> Result<Point> {
        self.check_space(x, "step")?;
        Ok(match (self, x) {
            (DynSystem::Rotation(rot), Point::Circle(c)) => {
                Point::Circle(step_circle(c, rot, dir)?)
            }
            (DynSystem::ConjugatedRotation(cr), Point::Circle(c)) => {
                let CircleCoord::Float(x) = c else {
                    return Err(Error::PrecisionExceeded {
                        mode: "exact".into(),
                        detail: "conjugated rotations evaluate through f64 callables".into(),
                        advice: "use float coordinates for conjugated rotations".into(),
                    });
                };
                let alpha = cr.rotation.alpha();
                let y = (cr.h_inv)(*x);
                let y = match dir {
                    Direction::Forward => frac(y + alpha),
                    Direction::Backward => frac(y - alpha),
                };
                Point::circle((cr.h)(y))
            }
            (DynSystem::FiniteCycle { period }, Point::Cycle { index, .. }) => {
                let p = *period;
                let next = match dir {
                    Direction::Forward => index % p + 1,
                    Direction::Backward => {
                        if *index == 1 {
                            p
                        } else {
                            index - 1
                        }
                    }
                };
                Point::Cycle {
                    period: p,
                    index: next,
                }
            }
            (DynSystem::SquaringMap, Point::Interval(x)) => Point::Interval(match dir {
                Direction::Forward => x * x,
                Direction::Backward => x.sqrt(),
            }),
            _ => unreachable!("space checked above"),
        })
    }

    /// φ^k for any integer k (k = 0 is the identity). Rotations take a
    /// single reduced translation by k·α; other systems step |k| times.
    pub fn iterate(&self, x: &Point, k: i64) -> Result<Point> {
        self.check_space(x, "iterate")?;
        if k == 0 {
            return Ok(x.clone());
        }
        match (self, x) {
            (DynSystem::Rotation(rot), Point::Circle(c)) => {
                Ok(Point::Circle(translate_circle(c, rot, k)))
            }
            (DynSystem::FiniteCycle { period }, Point::Cycle { index, .. }) => {
                let p = i64::from(*period);
                let idx0 = i64::from(*index) - 1;
                let shifted = (idx0 + k).rem_euclid(p);
                Ok(Point::Cycle {
                    period: *period,
                    index: u32::try_from(shifted).unwrap() + 1,
                })
            }
            _ => {
                let dir = if k > 0 {
                    Direction::Forward
                } else {
                    Direction::Backward
                };
                let mut y = x.clone();
                for _ in 0..k.unsigned_abs() {
                    y = self.step(&y, dir)?;
                }
                Ok(y)
            }
        }
    }

    /// Orbit points φ^k(x) for k in [k_min, k_max], walked step by step
    /// outward from x in both directions. Element i is φ^(k_min+i)(x).
    pub fn orbit_segment(&self, x: &Point, k_min: i64, k_max: i64) -> Result<Vec<Point>> {
        assert!(k_min <= k_max, "orbit_segment: empty range");
        self.check_space(x, "orbit_segment")?;
        let len = usize::try_from(k_max - k_min).unwrap() + 1;
        let mut out = vec![x.clone(); len];
        // forward leg
        let mut y = x.clone();
        for k in 1..=k_max.max(0) {
            y = self.step(&y, Direction::Forward)?;
            if k >= k_min {
                out[usize::try_from(k - k_min).unwrap()] = y.clone();
            }
        }
        // backward leg
        let mut y = x.clone();
        for k in 1..=(-k_min).max(0) {
            y = self.step(&y, Direction::Backward)?;
            if -k <= k_max {
                out[usize::try_from(-k - k_min).unwrap()] = y.clone();
            }
        }
        Ok(out)
    }
}

fn step_circle(c: &CircleCoord, rot: &Rotation, dir: Direction) -> Result<CircleCoord> {
    Ok(match c {
        CircleCoord::Float(x) => CircleCoord::Float(match dir {
            Direction::Forward => frac(x + rot.alpha()),
            Direction::Backward => frac(x - rot.alpha()),
        }),
        CircleCoord::Exact(r) => {
            let a = rot.alpha_exact();
            let moved = match dir {
                Direction::Forward => r + a,
                Direction::Backward => r - a,
            };
            CircleCoord::Exact(frac_rational(&moved))
        }
    })
}

fn translate_circle(c: &CircleCoord, rot: &Rotation, k: i64) -> CircleCoord {
    match c {
        CircleCoord::Float(x) => CircleCoord::Float(frac(x + (k as f64) * rot.alpha())),
        CircleCoord::Exact(r) => {
            let shift = rot.alpha_exact() * BigRational::from(BigInt::from(k));
            CircleCoord::Exact(frac_rational(&(r + shift)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_8; // (sqrt(5)-1)/2
    const SILVER: f64 = 0.414_213_562_373_095_05; // sqrt(2)-1

    #[test]
    fn named_constants_match_closed_forms() {
        assert!((RotationNumber::golden().value() - GOLDEN).abs() < 1e-15);
        assert!((RotationNumber::silver().value() - SILVER).abs() < 1e-15);
    }

    #[test]
    fn rational_declarations_are_rejected() {
        assert!(matches!(
            RotationNumber::quadratic(vec![4], vec![]),
            Err(Error::RationalRotation(_))
        ));
        assert!(matches!(
            RotationNumber::quadratic(vec![1, 0], vec![2]),
            Err(Error::RationalRotation(_))
        ));
    }

    #[test]
    fn golden_convergents_are_fibonacci_ratios() {
        let number = RotationNumber::golden();
        let got: Vec<(i64, i64)> = number
            .convergents()
            .take(7)
            .map(|(p, q)| (p.to_i64().unwrap(), q.to_i64().unwrap()))
            .collect();
        assert_eq!(
            got,
            [(1, 1), (1, 2), (2, 3), (3, 5), (5, 8), (8, 13), (13, 21)]
        );
    }

    #[test]
    fn approximant_error_is_below_inverse_denominator_squared() {
        let number = RotationNumber::silver();
        let approx = number.approximant(&BigInt::from(1_000_000u64));
        let err = (approx.to_f64().unwrap() - SILVER).abs();
        assert!(err < 1e-12, "err = {err:e}");
    }

    #[test]
    fn rotation_orbit_segment_matches_hand_values() {
        let s = DynSystem::rotation(RotationNumber::golden());
        let orbit = s.orbit_segment(&Point::circle(0.0), 0, 2).unwrap();
        let xs: Vec<f64> = orbit.iter().map(Point::as_f64).collect();
        assert!((xs[0] - 0.0).abs() < 1e-15);
        assert!((xs[1] - GOLDEN).abs() < 1e-15);
        // frac(2α) = 2α − 1 = 0.23606797749978970
        assert!((xs[2] - 0.236_067_977_499_789_7).abs() < 1e-14);
    }

    #[test]
    fn finite_cycle_steps_wrap() {
        let s = DynSystem::finite_cycle(3).unwrap();
        let x = Point::cycle(3, 2).unwrap();
        assert_eq!(
            s.step(&x, Direction::Forward).unwrap(),
            Point::cycle(3, 3).unwrap()
        );
        assert_eq!(
            s.step(&Point::cycle(3, 3).unwrap(), Direction::Forward).unwrap(),
            Point::cycle(3, 1).unwrap()
        );
        assert_eq!(
            s.step(&Point::cycle(3, 1).unwrap(), Direction::Backward).unwrap(),
            Point::cycle(3, 3).unwrap()
        );
        assert_eq!(
            s.iterate(&x, -7).unwrap(),
            Point::cycle(3, 1).unwrap() // 2 - 7 = -5 ≡ 1 (mod 3), 1-based
        );
    }

    #[test]
    fn squaring_map_steps() {
        let s = DynSystem::squaring();
        let x = Point::interval(0.5).unwrap();
        assert_eq!(
            s.step(&x, Direction::Forward).unwrap(),
            Point::Interval(0.25)
        );
        let back = s.step(&x, Direction::Backward).unwrap();
        assert_eq!(back.as_f64(), 0.5f64.sqrt());
    }

    #[test]
    fn forward_backward_roundtrip_on_random_points() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next_unit = move || {
            // xorshift; plenty for test point generation
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let systems = [
            DynSystem::rotation(RotationNumber::golden()),
            DynSystem::rotation(RotationNumber::silver()),
            DynSystem::squaring(),
            DynSystem::ConjugatedRotation(
                ConjugatedRotation::sine_warp(RotationNumber::golden(), 0.35).unwrap(),
            ),
        ];
        for s in &systems {
            for _ in 0..10_000 {
                let u = next_unit();
                let x = match s.space_name() {
                    "circle" => Point::circle(u),
                    _ => Point::interval(u).unwrap(),
                };
                let there = s.step(&x, Direction::Forward).unwrap();
                let back = s.step(&there, Direction::Backward).unwrap();
                let d = if s.space_name() == "circle" {
                    circle_distance(back.as_f64(), x.as_f64())
                } else {
                    (back.as_f64() - x.as_f64()).abs()
                };
                assert!(d <= 1e-15, "roundtrip drift {d:e} on {}", s.space_name());
            }
        }
    }

    #[test]
    fn rotation_orbit_points_stay_pairwise_distinct() {
        let s = DynSystem::rotation(RotationNumber::golden());
        let orbit = s.orbit_segment(&Point::circle(0.1), 0, 1000).unwrap();
        let xs: Vec<f64> = orbit.iter().map(Point::as_f64).collect();
        for i in 0..xs.len() {
            for j in (i + 1)..xs.len() {
                assert!(
                    circle_distance(xs[i], xs[j]) > 1e-12,
                    "orbit points {i} and {j} collide"
                );
            }
        }
    }

    #[test]
    fn exact_and_float_rotation_orbits_agree() {
        let s = DynSystem::rotation(RotationNumber::golden());
        let xf = Point::circle(0.125);
        let xe = Point::circle_exact(BigRational::new(BigInt::from(1), BigInt::from(8)));
        let of = s.orbit_segment(&xf, -200, 200).unwrap();
        let oe = s.orbit_segment(&xe, -200, 200).unwrap();
        for (a, b) in of.iter().zip(&oe) {
            assert!(circle_distance(a.as_f64(), b.as_f64()) < 1e-12);
        }
    }

    #[test]
    fn iterate_agrees_with_repeated_steps() {
        let s = DynSystem::rotation(RotationNumber::silver());
        let x = Point::circle(0.3);
        let direct = s.iterate(&x, 137).unwrap();
        let mut walked = x.clone();
        for _ in 0..137 {
            walked = s.step(&walked, Direction::Forward).unwrap();
        }
        assert!(circle_distance(direct.as_f64(), walked.as_f64()) < 1e-12);
    }

    #[test]
    fn space_mismatch_is_reported() {
        let s = DynSystem::finite_cycle(4).unwrap();
        let err = s.step(&Point::circle(0.2), Direction::Forward);
        assert!(matches!(err, Err(Error::SpaceMismatch { .. })));
    }

    #[test]
    fn conjugated_rotation_rejects_exact_coordinates() {
        let cr = ConjugatedRotation::sine_warp(RotationNumber::golden(), 0.2).unwrap();
        let s = DynSystem::ConjugatedRotation(cr);
        let x = Point::circle_exact(BigRational::new(BigInt::from(1), BigInt::from(3)));
        assert!(matches!(
            s.step(&x, Direction::Forward),
            Err(Error::PrecisionExceeded { .. })
        ));
    }
}
