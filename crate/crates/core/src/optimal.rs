//! The intermediate distribution `Q̃`, its clipping constants and the optimal
//! bounded e-variable `E*(x) = min(c2, max(c1, q(x)/p(x)))`.
//!
//! For a multiplier `λ`, `c1(λ) = exp(-ε/2 + λ - 1)` and `c2(λ) = exp(ε/2 + λ - 1)`.
//! `λ*` solves `f(λ) = c1 P(A) + Q(M) + c2 P(B) = 1`, i.e. `E^P[E*] = 1`. Since
//! `f(λ) = E^P[clip(LR, c1, c2)]` is continuous and nondecreasing, a root is
//! found by bracket expansion and bisection; finite pairs then get an exact
//! solve on the identified regions.

use serde::{Deserialize, Serialize};

use crate::dist::{RegionMasses, TestingPair};
use crate::error::{Error, Result};
use crate::evar::BoundedEVariable;
use crate::numeric::{bisect, expand_bracket};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalConstruction {
    pub epsilon: f64,
    pub lambda_star: f64,
    pub c1: f64,
    pub c2: f64,
    pub mass_a_null: f64,
    pub mass_b_null: f64,
    pub mass_m_alt: f64,
    /// `KL(Q̃ || P)` in nats.
    pub kl_qtilde_null: f64,
    /// `TV(Q̃, Q)`.
    pub tv_qtilde_alt: f64,
    /// `E^Q[ln E*]`, nats per sample.
    pub rate: f64,
    /// `P = Q`: both clipping regions are empty and the rate is zero.
    pub degenerate: bool,
}

fn clip_levels(lambda: f64, epsilon: f64) -> (f64, f64) {
    ((lambda - 1.0 - 0.5 * epsilon).exp(), (lambda - 1.0 + 0.5 * epsilon).exp())
}

fn calibration_sum(m: &RegionMasses, c1: f64, c2: f64) -> f64 {
    c1 * m.null_a + m.alt_m + c2 * m.null_b
}

/// Solves for `λ*` and fills in every derived quantity.
pub fn solve_lambda_star(pair: &TestingPair, epsilon: f64, tol: f64) -> Result<OptimalConstruction> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {tol} must be positive")));
    }
    if pair.is_identical() {
        let (c1, c2) = clip_levels(1.0, epsilon);
        return Ok(OptimalConstruction {
            epsilon,
            lambda_star: 1.0,
            c1,
            c2,
            mass_a_null: 0.0,
            mass_b_null: 0.0,
            mass_m_alt: 1.0,
            kl_qtilde_null: 0.0,
            tv_qtilde_alt: 0.0,
            rate: 0.0,
            degenerate: true,
        });
    }

    let lambda = match flat_region_center(pair, epsilon) {
        Some(l) => l,
        None => {
            let g = |l: f64| {
                let (c1, c2) = clip_levels(l, epsilon);
                match pair.region_masses(c1, c2) {
                    Ok(m) => calibration_sum(&m, c1, c2) - 1.0,
                    Err(_) => f64::NAN,
                }
            };
            let (lo, hi) = expand_bracket(&g, 1.0 - epsilon, 1.0 + epsilon, 1500.0)?;
            let l = bisect(&g, lo, hi, 0.01 * tol);
            if pair.is_finite() { refine_on_regions(pair, epsilon, l) } else { l }
        }
    };

    let (c1, c2) = clip_levels(lambda, epsilon);
    let m = pair.region_masses(c1, c2)?;
    let residual = calibration_sum(&m, c1, c2) - 1.0;
    if residual.abs() > tol {
        return Err(Error::NoRootInBracket { lo: lambda, hi: lambda, f_lo: residual + 1.0, f_hi: residual + 1.0 });
    }

    let mut c = OptimalConstruction {
        epsilon,
        lambda_star: lambda,
        c1,
        c2,
        mass_a_null: m.null_a,
        mass_b_null: m.null_b,
        mass_m_alt: m.alt_m,
        kl_qtilde_null: 0.0,
        tv_qtilde_alt: 0.0,
        rate: 0.0,
        degenerate: false,
    };
    let e_star = |x: f64| pair.likelihood_ratio(x).map(|r| r.clamp(c1, c2)).unwrap_or(c1);
    c.kl_qtilde_null = pair
        .null()
        .expect(|x| {
            let e = e_star(x);
            e * e.ln()
        })?
        .value;
    // Q̃ moves mass from B to A: TV = Q̃(A) - Q(A) = Q(B) - Q̃(B).
    c.tv_qtilde_alt = 0.5 * ((c1 * m.null_a - m.alt_a) + (m.alt_b - c2 * m.null_b));
    c.rate = pair.alt().expect(|x| e_star(x).ln())?.value;
    Ok(c)
}

/// For finite pairs whose likelihood ratios span at most a factor `e^ε`,
/// every `λ` in an interval leaves both regions empty and solves the
/// calibration; the interval's midpoint is returned.
fn flat_region_center(pair: &TestingPair, epsilon: f64) -> Option<f64> {
    let points = pair.support_points()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in points {
        if pair.null().density(x) == 0.0 {
            continue;
        }
        let l = pair.ln_likelihood_ratio(x).ok()?;
        lo = lo.min(l);
        hi = hi.max(l);
    }
    if lo.is_finite() && hi - lo <= epsilon {
        Some(1.0 + 0.5 * (lo + hi))
    } else {
        None
    }
}

/// Within fixed regions `f(λ) = e^(λ-1) (e^(-ε/2) P(A) + e^(ε/2) P(B)) + Q(M)`,
/// so the root has a closed form. Used to polish the bisection estimate.
fn refine_on_regions(pair: &TestingPair, epsilon: f64, lambda: f64) -> f64 {
    let (c1, c2) = clip_levels(lambda, epsilon);
    let Ok(m) = pair.region_masses(c1, c2) else { return lambda };
    let denom = (-0.5 * epsilon).exp() * m.null_a + (0.5 * epsilon).exp() * m.null_b;
    if denom <= 0.0 || m.alt_m >= 1.0 {
        return lambda;
    }
    let candidate = 1.0 + ((1.0 - m.alt_m) / denom).ln();
    let (d1, d2) = clip_levels(candidate, epsilon);
    match pair.region_masses(d1, d2) {
        Ok(m2) if m2 == m => {
            let old = (calibration_sum(&m, c1, c2) - 1.0).abs();
            let new = (calibration_sum(&m2, d1, d2) - 1.0).abs();
            if new <= old { candidate } else { lambda }
        }
        _ => lambda,
    }
}

/// The clipped likelihood ratio at `x`.
pub fn e_star(construction: &OptimalConstruction, pair: &TestingPair, x: f64) -> Result<f64> {
    Ok(pair.likelihood_ratio(x)?.clamp(construction.c1, construction.c2))
}

/// The optimal per-sample e-power at privacy level `epsilon`.
pub fn rate(pair: &TestingPair, epsilon: f64) -> Result<f64> {
    Ok(solve_lambda_star(pair, epsilon, DEFAULT_TOL)?.rate)
}

/// `E*` bundled with its pair, usable wherever a bounded e-variable is needed.
#[derive(Debug, Clone)]
pub struct OptimalEVariable {
    pair: TestingPair,
    construction: OptimalConstruction,
}

impl OptimalEVariable {
    pub fn new(pair: TestingPair, epsilon: f64) -> Result<Self> {
        let construction = solve_lambda_star(&pair, epsilon, DEFAULT_TOL)?;
        Ok(OptimalEVariable { pair, construction })
    }

    pub fn construction(&self) -> &OptimalConstruction {
        &self.construction
    }

    pub fn pair(&self) -> &TestingPair {
        &self.pair
    }
}

impl BoundedEVariable for OptimalEVariable {
    fn value(&self, x: f64) -> Result<f64> {
        e_star(&self.construction, &self.pair, x)
    }

    fn range(&self) -> (f64, f64) {
        (self.construction.c1, self.construction.c2)
    }

    fn name(&self) -> &'static str {
        "optimal"
    }
}

/// Serialisable summary of a construction, used by the CLI and for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub null: String,
    pub alt: String,
    #[serde(flatten)]
    pub construction: OptimalConstruction,
}

/// Renders a construction as a TOML record. Floats use shortest round-trip
/// formatting, so `parse_construction_report` recovers every field exactly.
pub fn emit_construction_report(pair: &TestingPair, construction: &OptimalConstruction) -> String {
    let report = ConstructionReport {
        null: pair.null().label().to_string(),
        alt: pair.alt().label().to_string(),
        construction: *construction,
    };
    toml::to_string(&report).expect("report fields are plain scalars")
}

pub fn parse_construction_report(text: &str) -> Result<ConstructionReport> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
