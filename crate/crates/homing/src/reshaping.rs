//! The univariate reshaping-function family f(c) applied to bearing
//! alignment cosines, with the two built-in instances and a numerical audit
//! of the admissibility conditions.
//!
//! Admissibility asks for f(1) = 0, a non-positive slope that stays finite
//! at c = 1, and f(c) + (1 - c) f'(c) <= 0 on [-1, 1]. Any user type that
//! passes `verify_assumption` can drive every controller in this crate.

use crate::error::HomingError;

/// Inputs farther outside [-1, 1] than this are rejected instead of clamped.
pub const COSINE_CLAMP_TOL: f64 = 1e-12;

/// Below this distance from c = 1 the angle-squared derivatives switch to
/// series evaluation to avoid 0/0.
pub const SERIES_SWITCH: f64 = 1e-4;

/// Slope and curvature of the angle-squared instance diverge at c = -1;
/// they are evaluated no closer to the antipode than this.
pub const ANTIPODE_CLAMP: f64 = 1e-9;

/// Pass/fail tolerance for the assumption audit.
pub const ASSUMPTION_TOL: f64 = 1e-10;

/// Value and first two derivatives of a reshaping function at one cosine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reshaped {
    pub f: f64,
    pub df: f64,
    pub ddf: f64,
}

/// A reshaping function of the alignment cosine.
///
/// `eval` may assume `c` is already inside [-1, 1]; entry points that accept
/// raw cosines clamp through [`clamp_cosine`] first.
pub trait Reshaping: std::fmt::Debug + Send + Sync {
    fn tag(&self) -> &str;

    fn eval(&self, c: f64) -> Reshaped;

    /// The bounded product f'(c) * sqrt(1 - c^2), which is the magnitude
    /// factor of the tangential gradient term. Implementations should
    /// provide a cancellation-free closed form where one exists.
    fn tangent_gain(&self, c: f64) -> f64 {
        self.eval(c).df * ((1.0 - c) * (1.0 + c)).max(0.0).sqrt()
    }
}

/// f(c) = 1 - c. Turns the gradient into the average-landmark-vector law.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cosine;

impl Reshaping for Cosine {
    fn tag(&self) -> &str {
        "cosine"
    }

    fn eval(&self, c: f64) -> Reshaped {
        debug_assert!((-1.0..=1.0).contains(&c));
        Reshaped {
            f: 1.0 - c,
            df: -1.0,
            ddf: 0.0,
        }
    }

    fn tangent_gain(&self, c: f64) -> f64 {
        // (1-c)(1+c) instead of 1-c^2: no cancellation near |c| = 1
        -((1.0 - c) * (1.0 + c)).max(0.0).sqrt()
    }
}

/// f(c) = arccos(c)^2 / 2, the squared bearing angle.
#[derive(Debug, Clone, Copy, Default)]
pub struct AngleSquared;

impl Reshaping for AngleSquared {
    fn tag(&self) -> &str {
        "angle_squared"
    }

    fn eval(&self, c: f64) -> Reshaped {
        debug_assert!((-1.0..=1.0).contains(&c));
        let acos = c.acos();
        let f = 0.5 * acos * acos;
        let u = 1.0 - c;
        let (df, ddf) = if u <= SERIES_SWITCH {
            // Series in u = 1 - c around the removable singularity at c = 1:
            //   df  = -(1 + u/3 + 2u^2/15 + 2u^3/35 + ...)
            //   ddf = 1/3 + 4u/15 + 6u^2/35 + ...
            (
                -(1.0 + u / 3.0 + 2.0 * u * u / 15.0 + 2.0 * u * u * u / 35.0),
                1.0 / 3.0 + 4.0 * u / 15.0 + 6.0 * u * u / 35.0,
            )
        } else {
            // Clamped away from c = -1 so the closed forms stay finite.
            let c = c.max(-1.0 + ANTIPODE_CLAMP);
            let s_sq = (1.0 - c) * (1.0 + c);
            let df = -c.acos() / s_sq.sqrt();
            let ddf = (1.0 + c * df) / s_sq;
            (df, ddf)
        };
        Reshaped { f, df, ddf }
    }

    fn tangent_gain(&self, c: f64) -> f64 {
        // df * sqrt(1-c^2) = -arccos(c) exactly; bounded by pi
        -c.acos()
    }
}

/// Clamp a raw cosine into [-1, 1], rejecting values farther outside than
/// the clamp tolerance.
pub fn clamp_cosine(c: f64) -> Result<f64, HomingError> {
    if !c.is_finite() || c > 1.0 + COSINE_CLAMP_TOL || c < -1.0 - COSINE_CLAMP_TOL {
        return Err(HomingError::DomainError { value: c });
    }
    Ok(c.clamp(-1.0, 1.0))
}

/// Evaluate the cosine instance on a raw cosine input.
pub fn cosine_f(c: f64) -> Result<Reshaped, HomingError> {
    Ok(Cosine.eval(clamp_cosine(c)?))
}

/// Evaluate the angle-squared instance on a raw cosine input.
pub fn angle_squared_f(c: f64) -> Result<Reshaped, HomingError> {
    Ok(AngleSquared.eval(clamp_cosine(c)?))
}

/// Look up a built-in instance by its scenario-file tag.
pub fn from_tag(tag: &str) -> Option<&'static dyn Reshaping> {
    match tag {
        "cosine" => Some(&Cosine),
        "angle_squared" => Some(&AngleSquared),
        _ => None,
    }
}

/// Numerical audit of the three admissibility conditions over a uniform
/// endpoint-inclusive grid on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub grid_size: usize,
    /// |f(1)|, the violation of the zero-at-alignment condition.
    pub max_violation_minval: f64,
    /// Largest positive slope over the grid (slope must be <= 0).
    pub max_violation_slope: f64,
    /// Largest positive value of f(c) + (1 - c) f'(c) over the grid.
    pub max_violation_mix: f64,
    pub pass: bool,
}

pub fn verify_assumption(rf: &dyn Reshaping, grid_size: usize) -> AssumptionReport {
    assert!(grid_size >= 3, "grid_size must be at least 3");
    let mut max_slope = 0.0_f64;
    let mut max_mix = 0.0_f64;
    let mut max_minval = 0.0_f64;
    for k in 0..grid_size {
        let c = -1.0 + 2.0 * k as f64 / (grid_size - 1) as f64;
        let r = rf.eval(c.clamp(-1.0, 1.0));
        if !r.df.is_finite() || !r.f.is_finite() {
            return AssumptionReport {
                grid_size,
                max_violation_minval: f64::INFINITY,
                max_violation_slope: f64::INFINITY,
                max_violation_mix: f64::INFINITY,
                pass: false,
            };
        }
        max_slope = max_slope.max(r.df);
        max_mix = max_mix.max(r.f + (1.0 - c) * r.df);
        if k == grid_size - 1 {
            max_minval = r.f.abs();
        }
    }
    let pass = max_minval <= ASSUMPTION_TOL
        && max_slope <= ASSUMPTION_TOL
        && max_mix <= ASSUMPTION_TOL;
    AssumptionReport {
        grid_size,
        max_violation_minval: max_minval,
        max_violation_slope: max_slope,
        max_violation_mix: max_mix,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    #[test]
    fn cosine_instance_values() {
        let r = cosine_f(1.0).unwrap();
        assert_eq!((r.f, r.df, r.ddf), (0.0, -1.0, 0.0));
        let r = cosine_f(0.0).unwrap();
        assert_eq!((r.f, r.df, r.ddf), (1.0, -1.0, 0.0));
        let r = cosine_f(-1.0).unwrap();
        assert_eq!((r.f, r.df, r.ddf), (2.0, -1.0, 0.0));
    }

    #[test]
    fn angle_squared_instance_values() {
        let r = angle_squared_f(1.0).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.df, -1.0);
        assert_relative_eq!(r.ddf, 1.0 / 3.0, epsilon = 1e-15);

        let r = angle_squared_f(0.0).unwrap();
        assert_relative_eq!(r.f, PI * PI / 8.0, epsilon = 1e-15);
        assert_relative_eq!(r.df, -PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.ddf, 1.0, epsilon = 1e-15);

        // c = cos(1): f = 1/2, df = -1/sin(1)
        let r = angle_squared_f(1.0_f64.cos()).unwrap();
        assert_relative_eq!(r.f, 0.5, epsilon = 1e-14);
        assert_relative_eq!(r.df, -1.0 / 1.0_f64.sin(), epsilon = 1e-13);
    }

    #[test]
    fn raw_cosines_outside_the_clamp_band_are_rejected() {
        assert!(angle_squared_f(1.0 + 1e-6).is_err());
        assert!(cosine_f(-1.0 - 1e-6).is_err());
        assert!(cosine_f(f64::NAN).is_err());
        // within tolerance: silently clamped
        let r = angle_squared_f(1.0 + 1e-13).unwrap();
        assert_eq!(r.f, 0.0);
        assert!(cosine_f(-1.0 - 1e-13).unwrap().f == 2.0);
    }

    #[test]
    fn angle_squared_branches_agree_at_the_switch() {
        // evaluate just inside each branch around u = SERIES_SWITCH
        let below = AngleSquared.eval(1.0 - (SERIES_SWITCH - 1e-9));
        let above = AngleSquared.eval(1.0 - (SERIES_SWITCH + 1e-9));
        assert_relative_eq!(below.df, above.df, epsilon = 1e-8);
        assert_relative_eq!(below.ddf, above.ddf, epsilon = 1e-8);
    }

    // Independent check of the series coefficients: central differences of
    // the closed-form slope, evaluated safely away from the switch, must
    // match the series curvature extrapolated to the same point.
    #[test]
    fn series_curvature_matches_closed_form_slope_differences() {
        let u0 = 5e-4;
        let c0 = 1.0 - u0;
        let h = 1e-6;
        let fd = (AngleSquared.eval(c0 + h).df - AngleSquared.eval(c0 - h).df) / (2.0 * h);
        let series = 1.0 / 3.0 + 4.0 * u0 / 15.0 + 6.0 * u0 * u0 / 35.0;
        assert_relative_eq!(fd, series, epsilon = 1e-6);
        // and the curvature limit itself
        assert_relative_eq!(AngleSquared.eval(1.0 - 1e-6).ddf, 1.0 / 3.0, epsilon = 1e-4);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let h = 1e-6;
        for rf in [&Cosine as &dyn Reshaping, &AngleSquared] {
            for _ in 0..100 {
                let c: f64 = rng.gen_range(-0.999..0.999);
                let fd_df = (rf.eval(c + h).f - rf.eval(c - h).f) / (2.0 * h);
                let fd_ddf = (rf.eval(c + h).df - rf.eval(c - h).df) / (2.0 * h);
                let r = rf.eval(c);
                assert_relative_eq!(r.df, fd_df, epsilon = 1e-5, max_relative = 1e-5);
                assert_relative_eq!(r.ddf, fd_ddf, epsilon = 1e-5, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn tangent_gain_matches_its_definition_and_stays_bounded() {
        for rf in [&Cosine as &dyn Reshaping, &AngleSquared] {
            for k in 0..=200 {
                let c = -0.999 + 1.998 * k as f64 / 200.0;
                let expect = rf.eval(c).df * (1.0 - c * c).sqrt();
                assert_relative_eq!(rf.tangent_gain(c), expect, epsilon = 1e-9);
            }
            assert_eq!(rf.tangent_gain(1.0), 0.0);
        }
        // bounded at the antipode even though df diverges there
        assert_relative_eq!(AngleSquared.tangent_gain(-1.0), -PI, epsilon = 1e-15);
        assert_eq!(Cosine.tangent_gain(-1.0), 0.0);
        // derivatives themselves must stay finite everywhere
        let r = AngleSquared.eval(-1.0);
        assert!(r.df.is_finite() && r.ddf.is_finite());
    }

    #[test]
    fn assumption_audit_passes_for_both_instances() {
        for rf in [&Cosine as &dyn Reshaping, &AngleSquared] {
            let report = verify_assumption(rf, 1001);
            assert!(report.pass, "{}: {report:?}", rf.tag());
        }
        // the mixed bound holds with margin on a dense grid
        let report = verify_assumption(&AngleSquared, 10001);
        assert!(report.max_violation_mix <= 1e-12, "{report:?}");
    }

    #[test]
    fn assumption_audit_rejects_an_inadmissible_function() {
        #[derive(Debug)]
        struct Identity;
        impl Reshaping for Identity {
            fn tag(&self) -> &str {
                "identity"
            }
            fn eval(&self, c: f64) -> Reshaped {
                Reshaped {
                    f: c,
                    df: 1.0,
                    ddf: 0.0,
                }
            }
        }
        let report = verify_assumption(&Identity, 101);
        assert!(!report.pass);
        assert_relative_eq!(report.max_violation_minval, 1.0);
        assert_relative_eq!(report.max_violation_slope, 1.0);
        assert_relative_eq!(report.max_violation_mix, 1.0);
    }

    proptest! {
        // lower cosine = larger cost, strictly
        #[test]
        fn reshaping_orders_cosines(c1 in -1.0..0.999_f64, gap in 1e-6..0.5_f64) {
            let c2 = (c1 + gap).min(1.0);
            prop_assert!(Cosine.eval(c1).f > Cosine.eval(c2).f);
            prop_assert!(AngleSquared.eval(c1).f > AngleSquared.eval(c2).f);
        }
    }
}
