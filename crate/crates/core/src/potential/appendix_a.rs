//! Orbit-tent potentials on an irrational rotation with prescribed
//! summability endpoints at chosen base orbits.
//!
//! For each base point x_p and negative target β_p the construction
//! places, at every level n, a small tent of height b_n^p centered on
//! φ^n(x_p), minus the same tent pulled back 2n+1 steps, so that along
//! the base orbit the two-sided cocycle takes the closed form
//! S_k = Σ_{n<|k|} b_n^p while every other orbit point within the
//! certified horizon sees the value 0. Heights are slack-inflated slopes
//! b_n = t_n·a_n of a reference decay sequence chosen per target:
//!
//! - closed endpoint: e^{β_p Σ_{n<k} a_n} = c_k with Σ c_k < ∞, so the
//!   orbit weights are summable at β_p itself;
//! - open endpoint: the same with d_k ~ 1/k, summable only for β < β_p.
//!
//! The builder certifies every geometric and sequence condition it
//! relies on and records the margins in a [`TentCertificate`].

use serde::{Deserialize, Serialize};

use crate::dynsys::{circle_distance, frac, DynSystem, Point};
use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::potential::Potential;

/// Head offset of the reference decay sequences; flattens the early
/// terms so the slack conditions close at small indices.
const HEAD_OFFSET: f64 = 50.0;
/// Initial relative slack t_0 − 1.
const SLACK_INIT: f64 = 0.9;
/// Index scale on which the slack decays toward 0.
const SLACK_SCALE: f64 = 1e6;
/// Largest level count the built-in sequences are certified for.
const MAX_DEPTH: usize = 8;
/// Hard cap on the slack-condition scan.
const SLACK_SCAN_CAP: u64 = 10_000_000;

/// One target: realize summability of the base-orbit weights exactly on
/// (−∞, β] (`closed`) or (−∞, β) (open). β must be negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub beta: f64,
    pub closed: bool,
}

/// Build parameters for [`build_appendix_a`].
#[derive(Clone, Debug)]
pub struct AppendixAConfig {
    /// One base point per target, as circle coordinates.
    pub base_points: Vec<f64>,
    pub targets: Vec<TargetSpec>,
    /// Levels 0..=depth are materialized; deeper levels are summarized
    /// by the truncation tail bound.
    pub depth: usize,
    /// Lower bound imposed on every level's clearance horizon N_n; the
    /// certified eval horizon is at least this.
    pub guard_horizon: u64,
    /// Extra indices past N_n over which the slack condition is
    /// re-verified numerically.
    pub check_window: u64,
}

impl AppendixAConfig {
    pub fn new(base_points: Vec<f64>, targets: Vec<TargetSpec>) -> Self {
        Self {
            base_points,
            targets,
            depth: 3,
            guard_horizon: 12_000,
            check_window: 1_000,
        }
    }
}

/// A single tent pair: positive tent at `center`, negative copy at
/// `partner` = center − (2n+1)α.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TentArc {
    pub center: f64,
    pub partner: f64,
    pub radius: f64,
    pub height: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TentArcRecord {
    pub target: usize,
    pub center: f64,
    pub partner: f64,
    pub radius: f64,
    /// Distance from the arc pair to the nearest non-designated orbit
    /// point within the clearance horizon; radii are one third of the
    /// binding constraint.
    pub min_obstacle_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TentLevelRecord {
    pub n: usize,
    /// Clearance horizon N_n for this level.
    pub clearance: u64,
    /// sup_p b_n^p, the level's height.
    pub height_sup: f64,
    /// 2^{-n} − sup_p b_{N_n−1}^p; must be positive (heights past the
    /// clearance index are dominated by the dyadic envelope).
    pub height_envelope_margin: f64,
    /// min over the check window of slack-condition LHS − RHS; must be
    /// nonnegative at N_n and increasing across the window.
    pub slack_min_margin: f64,
    pub slack_margin_increasing: bool,
    pub arcs: Vec<TentArcRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetRecord {
    pub beta: f64,
    pub closed: bool,
    /// Partial sums Σ_{n<k} b_n at doubling checkpoints (divergence
    /// witness: the Cesàro weights e^{βS_k} must not be summable above
    /// the endpoint).
    pub tent_sum_checkpoints: Vec<(u64, f64)>,
    /// Partial sums Σ (b_n − a_n) at the same checkpoints (the excess
    /// divergence that separates the endpoint behaviors).
    pub excess_sum_checkpoints: Vec<(u64, f64)>,
    pub heights_vanish: bool,
    pub tent_sums_diverge: bool,
    pub excess_diverges: bool,
}

/// Everything the builder verified, with margins.
#[derive(Clone, Debug, Serialize)]
pub struct TentCertificate {
    pub alpha: f64,
    pub depth: usize,
    pub targets: Vec<TargetRecord>,
    /// Minimum distance between distinct base orbits (and to their own
    /// returns) over the scanned horizon.
    pub orbit_separation_min: f64,
    pub levels: Vec<TentLevelRecord>,
    /// Largest |eval − expected| over the designated orbit points,
    /// both directions, up to min(1000, horizon).
    pub orbit_value_max_gap: f64,
    /// Up to this index the built potential provably evaluates to the
    /// closed-form peak values along base orbits and to 0 elsewhere on
    /// them.
    pub certified_horizon: u64,
}

struct LevelArcs {
    arcs: Vec<TentArc>,
}

/// The built potential. Construct through [`build_appendix_a`].
#[derive(Debug)]
pub struct OrbitTentPotential {
    alpha: f64,
    base_points: Vec<f64>,
    targets: Vec<TargetSpec>,
    depth: usize,
    levels: Vec<LevelArcs>,
    certificate: TentCertificate,
}

impl std::fmt::Debug for LevelArcs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevelArcs").field("arcs", &self.arcs.len()).finish()
    }
}

/// ln g(u) for the closed-endpoint reference sequence g(u) = 1/((u+1)·ln²(u+2)).
fn log_g(u: f64) -> f64 {
    -(u + 1.0).ln() - 2.0 * (u + 2.0).ln().ln()
}

impl OrbitTentPotential {
    /// Per-target base slope a_n^p > 0 (slack-free tent height).
    pub fn seq_a(&self, p: usize, n: u64) -> f64 {
        let beta_abs = self.targets[p].beta.abs();
        let u = n as f64 + HEAD_OFFSET;
        if self.targets[p].closed {
            (log_g(u) - log_g(u + 1.0)) / beta_abs
        } else {
            // d_n = (n0+1)/(n+n0+1): ln d_n − ln d_{n+1} = ln((n+n0+2)/(n+n0+1))
            (1.0 / (u + 1.0)).ln_1p() / beta_abs
        }
    }

    /// Relative slack factor t_n, decreasing to 1.
    pub fn slack_factor(n: u64) -> f64 {
        1.0 + SLACK_INIT / (1.0 + (n as f64 / SLACK_SCALE).ln_1p())
    }

    /// Tent height b_n^p = t_n · a_n^p.
    pub fn seq_b(&self, p: usize, n: u64) -> f64 {
        Self::slack_factor(n) * self.seq_a(p, n)
    }

    /// Level height sup over targets.
    pub fn height_sup(&self, n: u64) -> f64 {
        (0..self.targets.len())
            .map(|p| self.seq_b(p, n))
            .fold(0.0, f64::max)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn base_points(&self) -> &[f64] {
        &self.base_points
    }

    pub fn targets(&self) -> &[TargetSpec] {
        &self.targets
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn certificate(&self) -> &TentCertificate {
        &self.certificate
    }

    pub fn certified_horizon(&self) -> u64 {
        self.certificate.certified_horizon
    }

    /// Sup-norm bound on (ideal − built): first omitted level's height
    /// plus the dyadic envelope of everything deeper.
    pub fn tail_bound(&self) -> f64 {
        self.height_sup(self.depth as u64 + 1) + 2f64.powi(1 - self.depth as i32)
    }

    /// Closed-form two-sided cocycle of the *ideal* potential along base
    /// orbit p: S_k = Σ_{n<|k|} b_n^p for every k (positive in both
    /// directions).
    pub fn base_orbit_sum(&self, p: usize, k: i64) -> f64 {
        let mut acc = CompensatedSum::new();
        for n in 0..k.unsigned_abs() {
            acc.add(self.seq_b(p, n));
        }
        acc.value()
    }

    /// S_0..S_len as a vector (forward side; the backward side is equal
    /// by construction).
    pub fn base_orbit_sums_prefix(&self, p: usize, len: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(len as usize + 1);
        let mut acc = CompensatedSum::new();
        out.push(0.0);
        for n in 0..len {
            acc.add(self.seq_b(p, n));
            out.push(acc.value());
        }
        out
    }

    /// Evaluate the built (truncated) potential at a circle point.
    pub fn eval(&self, x: &Point) -> Result<f64> {
        let x = match x {
            Point::Circle(c) => c.as_f64(),
            other => {
                return Err(Error::SpaceMismatch {
                    context: "orbit-tent potential eval",
                    expected: "circle",
                    got: other.space_name(),
                })
            }
        };
        let mut v = 0.0;
        for level in &self.levels {
            for arc in &level.arcs {
                v += tent(x, arc.center, arc.radius, arc.height);
                v -= tent(x, arc.partner, arc.radius, arc.height);
            }
        }
        Ok(v)
    }

    pub fn arcs(&self, n: usize) -> &[TentArc] {
        &self.levels[n].arcs
    }
}

fn tent(x: f64, center: f64, radius: f64, height: f64) -> f64 {
    let d = circle_distance(x, center);
    if d >= radius {
        0.0
    } else {
        height * (1.0 - d / radius)
    }
}

/// Construct an orbit-tent potential on an irrational rotation.
pub fn build_appendix_a(system: &DynSystem, cfg: &AppendixAConfig) -> Result<Potential> {
    let rotation = match system {
        DynSystem::Rotation(r) => r,
        _ => {
            return Err(Error::CriterionInapplicable(
                "orbit-tent construction requires a standard irrational rotation".into(),
            ))
        }
    };
    let alpha = rotation.alpha();
    let q = cfg.targets.len();
    if q == 0 || cfg.base_points.len() != q {
        return Err(Error::ConstraintViolation {
            condition: "targets and base points".into(),
            detail: format!(
                "need equal nonzero counts, got {} targets / {} base points",
                q,
                cfg.base_points.len()
            ),
        });
    }
    for t in &cfg.targets {
        if !t.beta.is_finite() || t.beta >= -1e-6 || t.beta <= -1e6 {
            return Err(Error::ConstraintViolation {
                condition: "target inverse temperature".into(),
                detail: format!("beta must lie in (-1e6, -1e-6], got {}", t.beta),
            });
        }
    }
    if cfg.depth > MAX_DEPTH {
        return Err(Error::ConstraintViolation {
            condition: "construction depth".into(),
            detail: format!(
                "depth {} exceeds the certified maximum {MAX_DEPTH} for the built-in slack sequences",
                cfg.depth
            ),
        });
    }
    if cfg.guard_horizon < 100 {
        return Err(Error::ConstraintViolation {
            condition: "guard horizon".into(),
            detail: "must be at least 100".into(),
        });
    }
    let base_points: Vec<f64> = cfg.base_points.iter().map(|&x| frac(x)).collect();

    // Partially built value used for sequence evaluation only.
    let mut pot = OrbitTentPotential {
        alpha,
        base_points: base_points.clone(),
        targets: cfg.targets.clone(),
        depth: cfg.depth,
        levels: Vec::new(),
        certificate: TentCertificate {
            alpha,
            depth: cfg.depth,
            targets: Vec::new(),
            orbit_separation_min: f64::INFINITY,
            levels: Vec::new(),
            orbit_value_max_gap: 0.0,
            certified_horizon: 0,
        },
    };

    // ---- orbit separation -------------------------------------------------
    let sep_horizon = cfg.guard_horizon as i64 + 2 * cfg.depth as i64 + 3;
    let mut separation = f64::INFINITY;
    // self-returns: min ||iα|| for 1 <= i <= horizon
    {
        let mut y = 0.0f64;
        for _ in 1..=sep_horizon {
            y = frac(y + alpha);
            separation = separation.min(circle_distance(y, 0.0));
        }
    }
    // cross-orbit distances
    for l in 0..q {
        for m in (l + 1)..q {
            for i in -sep_horizon..=sep_horizon {
                let y = frac(base_points[l] + i as f64 * alpha);
                separation = separation.min(circle_distance(y, base_points[m]));
            }
        }
    }
    if separation < 1e-9 {
        return Err(Error::ConstraintViolation {
            condition: "orbit separation".into(),
            detail: format!(
                "base orbits come within {separation:.3e} over the guard horizon; \
                 choose base points on distinct, well-separated orbits"
            ),
        });
    }
    pot.certificate.orbit_separation_min = separation;

    // ---- per-level clearance indices N_n (slack condition) ---------------
    let mut clearances: Vec<u64> = Vec::with_capacity(cfg.depth + 1);
    let mut level_records: Vec<TentLevelRecord> = Vec::with_capacity(cfg.depth + 1);
    for n in 0..=cfg.depth {
        // RHS constant: Σ_{i<=n} (2i+1)·sup_p b_i
        let arc_overhead: f64 = (0..=n as u64)
            .map(|i| (2 * i + 1) as f64 * pot.height_sup(i))
            .sum();
        // Scan for the smallest j with
        //   Σ_{k=n+1}^{j-1} b_k^p >= Σ_{k=0}^{j-1} a_k^p + overhead   (all p)
        // The margin increases in j because b_k > a_k, so the first hit
        // certifies everything beyond it.
        let mut j0_all: u64 = 0;
        for p in 0..q {
            let mut sum_b = CompensatedSum::new();
            let mut sum_a = CompensatedSum::new();
            for k in 0..=(n as u64 + 1) {
                sum_a.add(pot.seq_a(p, k));
            }
            let mut j = n as u64 + 2;
            sum_b.add(pot.seq_b(p, n as u64 + 1));
            let j0 = loop {
                if sum_b.value() >= sum_a.value() + arc_overhead {
                    break j;
                }
                sum_a.add(pot.seq_a(p, j));
                sum_b.add(pot.seq_b(p, j));
                j += 1;
                if j > SLACK_SCAN_CAP {
                    return Err(Error::ConstraintViolation {
                        condition: format!("slack condition, level {n}"),
                        detail: format!(
                            "no admissible clearance index below {SLACK_SCAN_CAP} for target {p}"
                        ),
                    });
                }
            };
            j0_all = j0_all.max(j0);
        }
        let floor = (3 * (n + 1)) as u64;
        let prev = clearances.last().copied().map_or(0, |v| v + 1);
        let clearance = j0_all.max(floor).max(cfg.guard_horizon).max(prev);

        // Height envelope margin (heights past N_n−1 under 2^{-n}).
        let tallest_at_edge = pot.height_sup(clearance - 1);
        let height_envelope_margin = 2f64.powi(-(n as i32)) - tallest_at_edge;
        if height_envelope_margin <= 0.0 {
            return Err(Error::ConstraintViolation {
                condition: format!("height envelope, level {n}"),
                detail: format!(
                    "height {tallest_at_edge:.3e} at index {} is not below 2^-{n}",
                    clearance - 1
                ),
            });
        }

        // Re-verify the slack margin at N_n and across the check window.
        let mut slack_min_margin = f64::INFINITY;
        let mut increasing = true;
        for p in 0..q {
            let mut sum_b = CompensatedSum::new();
            let mut sum_a = CompensatedSum::new();
            for k in 0..clearance {
                sum_a.add(pot.seq_a(p, k));
                if k > n as u64 {
                    sum_b.add(pot.seq_b(p, k));
                }
            }
            let mut prev_margin = f64::NEG_INFINITY;
            for j in clearance..=(clearance + cfg.check_window) {
                let margin = sum_b.value() - sum_a.value() - arc_overhead;
                slack_min_margin = slack_min_margin.min(margin);
                if margin < prev_margin {
                    increasing = false;
                }
                prev_margin = margin;
                sum_a.add(pot.seq_a(p, j));
                sum_b.add(pot.seq_b(p, j));
            }
        }
        if slack_min_margin < 0.0 {
            return Err(Error::ConstraintViolation {
                condition: format!("slack condition, level {n}"),
                detail: format!("margin {slack_min_margin:.3e} at clearance {clearance}"),
            });
        }

        clearances.push(clearance);
        level_records.push(TentLevelRecord {
            n,
            clearance,
            height_sup: pot.height_sup(n as u64),
            height_envelope_margin,
            slack_min_margin,
            slack_margin_increasing: increasing,
            arcs: Vec::new(),
        });
    }

    // ---- arcs -------------------------------------------------------------
    for n in 0..=cfg.depth {
        let clearance = clearances[n];
        let scan = clearance as i64 + 2 * n as i64 + 1;
        let mut arcs = Vec::with_capacity(q);
        let mut arc_records = Vec::with_capacity(q);
        for p in 0..q {
            let center = frac(base_points[p] + n as f64 * alpha);
            let partner = frac(center - (2.0 * n as f64 + 1.0) * alpha);
            // Binding distance: the designated pair must stay clear of
            // every other orbit point in the scan window.
            let mut d_min = circle_distance(center, partner);
            for (l, &other_base) in base_points.iter().enumerate() {
                for i in -scan..=scan {
                    if l == p && (i == n as i64 || i == -(n as i64) - 1) {
                        continue;
                    }
                    let y = frac(other_base + i as f64 * alpha);
                    d_min = d_min
                        .min(circle_distance(y, center))
                        .min(circle_distance(y, partner));
                }
            }
            let mut radius = d_min / 3.0;
            // Stay clear of every earlier arc (their closures included).
            for level in &pot.levels {
                for arc in &level.arcs {
                    for &mine in &[center, partner] {
                        for &(theirs, their_r) in
                            &[(arc.center, arc.radius), (arc.partner, arc.radius)]
                        {
                            let d = circle_distance(mine, theirs);
                            if d <= their_r {
                                return Err(Error::ConstraintViolation {
                                    condition: format!("arc nesting, level {n}"),
                                    detail: format!(
                                        "designated point {mine} sits inside an earlier arc \
                                         at {theirs} (radius {their_r:.3e})"
                                    ),
                                });
                            }
                            radius = radius.min((d - their_r) / 3.0);
                        }
                    }
                }
            }
            radius = radius.min(0.25 / ((n + 1) * (n + 1)) as f64);
            if radius < 1e-12 {
                return Err(Error::ConstraintViolation {
                    condition: format!("arc radius, level {n}"),
                    detail: format!("target {p}: radius collapsed to {radius:.3e}"),
                });
            }
            let height = pot.seq_b(p, n as u64);
            arcs.push(TentArc {
                center,
                partner,
                radius,
                height,
            });
            arc_records.push(TentArcRecord {
                target: p,
                center,
                partner,
                radius,
                min_obstacle_distance: d_min,
            });
        }
        pot.levels.push(LevelArcs { arcs });
        level_records[n].arcs = arc_records;
    }
    pot.certificate.levels = level_records;
    pot.certificate.certified_horizon = clearances[0];

    // ---- target records ----------------------------------------------------
    let witness_horizon = (4 * cfg.guard_horizon).max(100_000);
    for p in 0..q {
        let mut tent_sum = CompensatedSum::new();
        let mut excess_sum = CompensatedSum::new();
        let mut tent_cp = Vec::new();
        let mut excess_cp = Vec::new();
        let mut checkpoint = witness_horizon / 8;
        for k in 0..witness_horizon {
            let a = pot.seq_a(p, k);
            let b = pot.seq_b(p, k);
            tent_sum.add(b);
            excess_sum.add(b - a);
            if k + 1 == checkpoint {
                tent_cp.push((k + 1, tent_sum.value()));
                excess_cp.push((k + 1, excess_sum.value()));
                checkpoint *= 2;
            }
        }
        let heights_vanish = pot.seq_b(p, witness_horizon) < pot.seq_b(p, 0)
            && pot.seq_b(p, witness_horizon) < 2e-2;
        let tent_sums_diverge = tent_cp.windows(2).all(|w| w[1].1 > w[0].1 + 0.1);
        let excess_diverges = excess_cp.windows(2).all(|w| w[1].1 > w[0].1 + 0.05);
        pot.certificate.targets.push(TargetRecord {
            beta: cfg.targets[p].beta,
            closed: cfg.targets[p].closed,
            tent_sum_checkpoints: tent_cp,
            excess_sum_checkpoints: excess_cp,
            heights_vanish,
            tent_sums_diverge,
            excess_diverges,
        });
    }

    // ---- orbit value verification -------------------------------------------
    let sample = 1_000u64.min(pot.certificate.certified_horizon);
    let mut max_gap = 0.0f64;
    for (p, &base) in base_points.iter().enumerate() {
        let mut y = base;
        for i in 0..=sample {
            let expect = if i <= cfg.depth as u64 {
                pot.seq_b(p, i)
            } else {
                0.0
            };
            let got = pot.eval(&Point::circle(y))?;
            max_gap = max_gap.max((got - expect).abs());
            y = frac(y + alpha);
        }
        let mut y = base;
        for i in 1..=sample {
            y = frac(y - alpha);
            let expect = if i - 1 <= cfg.depth as u64 {
                -pot.seq_b(p, i - 1)
            } else {
                0.0
            };
            let got = pot.eval(&Point::circle(y))?;
            max_gap = max_gap.max((got - expect).abs());
        }
    }
    pot.certificate.orbit_value_max_gap = max_gap;
    if max_gap > 1e-7 {
        return Err(Error::ConstraintViolation {
            condition: "orbit value agreement".into(),
            detail: format!("max |eval − expected| = {max_gap:.3e} along base orbits"),
        });
    }

    Ok(Potential::AppendixA(std::sync::Arc::new(pot)))
}
