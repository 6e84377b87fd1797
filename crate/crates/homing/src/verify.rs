//! Self-audits used by tests and the `verify` subcommand: finite
//! differences are the ground truth for the analytic gradient, its
//! position differential, and the stored-bearing jacobian, over seeded
//! random cases; a second audit checks that the two algebraic forms of
//! the gradient agree.
//!
//! Cases are drawn with the robot at least 0.05 from every landmark and
//! every bearing pair at least 1e-3 from the antipode: the angle_squared
//! curvature blows up at the antipode and a central difference there
//! measures truncation error, not implementation error.

use nalgebra::{SVector, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::cost::{bearing_jacobian, cost, gradient, gradient_alternate, gradient_differential};
use crate::geometry::{cosine_alignment, BearingSet, Point, Scene, UnitVector};
use crate::reshaping::{AngleSquared, Cosine, Reshaping};

pub const AUDIT_TOL: f64 = 1e-4;
pub const EQUIVALENCE_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientAuditReport {
    pub cases: usize,
    pub max_rel_gradient: f64,
    pub max_rel_differential: f64,
    pub max_rel_bearing_jacobian: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub pairs: usize,
    pub max_abs_diff: f64,
    pub pass: bool,
}

struct Case<const D: usize> {
    scene: Scene<D>,
    x: Point<D>,
    rf: &'static dyn Reshaping,
    pair: usize,
}

fn uniform<const D: usize>(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> Point<D> {
    let mut p = Point::<D>::zeros();
    for k in 0..D {
        p[k] = rng.gen_range(lo..hi);
    }
    p
}

fn draw_case<const D: usize>(rng: &mut ChaCha12Rng, rf: &'static dyn Reshaping) -> Case<D> {
    loop {
        let n = rng.gen_range(2..=6);
        let landmarks: Vec<Point<D>> = (0..n).map(|_| uniform(rng, 0.0, 1.0)).collect();
        let home = uniform(rng, 0.25, 0.75);
        let Ok(scene) = Scene::new(landmarks, home) else {
            continue;
        };
        let x = uniform(rng, -0.5, 1.5);
        if scene.ranges_at(&x).iter().any(|d| *d < 0.05) {
            continue;
        }
        let current = scene.bearings_at(&x).expect("ranges checked");
        let home_b = scene.home_bearings();
        if (0..n).any(|i| 1.0 + cosine_alignment(&home_b[i], &current[i]) < 1e-3) {
            continue;
        }
        let eval = gradient(&current, &home_b, rf);
        if eval.grad.norm() < 1e-6 {
            continue;
        }
        if gradient_differential(&scene, &x, &home_b, rf)
            .expect("ranges checked")
            .matrix
            .norm()
            < 1e-3
        {
            continue;
        }
        let pair = rng.gen_range(0..n);
        return Case {
            scene,
            x,
            rf,
            pair,
        };
    }
}

fn tangent_basis<const D: usize>(g: &UnitVector<D>) -> Vec<SVector<f64, D>> {
    let mut basis: Vec<SVector<f64, D>> = Vec::new();
    for a in 0..D {
        let mut axis = SVector::<f64, D>::zeros();
        axis[a] = 1.0;
        let mut v = axis - g.as_ref() * g[a];
        for t in &basis {
            v -= t * t.dot(&v);
        }
        if v.norm() > 1e-6 {
            basis.push(v.normalize());
        }
        if basis.len() == D - 1 {
            break;
        }
    }
    basis
}

fn renormalized<const D: usize>(g: &UnitVector<D>, delta: &SVector<f64, D>) -> UnitVector<D> {
    Unit::new_normalize(g.as_ref() + delta)
}

/// The three per-case relative errors. `grad_at` is the field under audit;
/// tests substitute a corrupted one to prove the audit can fail.
fn case_errors<const D: usize>(
    case: &Case<D>,
    grad_at: &dyn Fn(&BearingSet<D>, &BearingSet<D>, &dyn Reshaping) -> SVector<f64, D>,
) -> (f64, f64, f64) {
    let scene = &case.scene;
    let rf = case.rf;
    let home = scene.home_bearings();
    let current = scene.bearings_at(&case.x).expect("case excludes collisions");

    let g = grad_at(&current, &home, rf);
    let mut fd_g = SVector::<f64, D>::zeros();
    let mut fd_jac = nalgebra::SMatrix::<f64, D, D>::zeros();
    for a in 0..D {
        let mut xp = case.x;
        let mut xm = case.x;
        xp[a] += FD_STEP;
        xm[a] -= FD_STEP;
        let phi_p = cost(scene, &home, &xp, rf).expect("case excludes collisions").phi;
        let phi_m = cost(scene, &home, &xm, rf).expect("case excludes collisions").phi;
        fd_g[a] = (phi_p - phi_m) / (2.0 * FD_STEP);
        let gp = gradient(&scene.bearings_at(&xp).unwrap(), &home, rf).grad;
        let gm = gradient(&scene.bearings_at(&xm).unwrap(), &home, rf).grad;
        fd_jac.set_column(a, &((gp - gm) / (2.0 * FD_STEP)));
    }
    let e_gradient = (fd_g - g).norm() / g.norm().max(1e-6);

    let jac = gradient_differential(scene, &case.x, &home, rf)
        .expect("case excludes collisions")
        .matrix;
    let e_differential = (fd_jac - jac).norm() / jac.norm();

    let i = case.pair;
    let jb = bearing_jacobian(&current[i], &home[i], rf);
    let term_of = |stored: UnitVector<D>| {
        gradient(
            &BearingSet::new(vec![current[i]]),
            &BearingSet::new(vec![stored]),
            rf,
        )
        .grad
    };
    let mut e_bearing = 0.0_f64;
    for tau in tangent_basis(&home[i]) {
        let fd = (term_of(renormalized(&home[i], &(FD_STEP * tau)))
            - term_of(renormalized(&home[i], &(-FD_STEP * tau))))
            / (2.0 * FD_STEP);
        let analytic = jb * tau;
        e_bearing = e_bearing.max((fd - analytic).norm() / analytic.norm().max(1e-3));
    }
    (e_gradient, e_differential, e_bearing)
}

type Grad2 = fn(&BearingSet<2>, &BearingSet<2>, &dyn Reshaping) -> SVector<f64, 2>;

fn true_gradient_2d(
    current: &BearingSet<2>,
    home: &BearingSet<2>,
    rf: &dyn Reshaping,
) -> SVector<f64, 2> {
    gradient(current, home, rf).grad
}

fn audit(seed: u64, n_cases: usize, grad2: Grad2) -> GradientAuditReport {
    assert!(n_cases >= 1, "need at least one case");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_g = 0.0_f64;
    let mut max_d = 0.0_f64;
    let mut max_b = 0.0_f64;
    for k in 0..n_cases {
        let rf: &'static dyn Reshaping = if k % 2 == 0 { &Cosine } else { &AngleSquared };
        let (eg, ed, eb) = if k % 4 == 3 {
            let case = draw_case::<3>(&mut rng, rf);
            case_errors(&case, &|c, h, rf| gradient(c, h, rf).grad)
        } else {
            let case = draw_case::<2>(&mut rng, rf);
            case_errors(&case, &|c, h, rf| grad2(c, h, rf))
        };
        max_g = max_g.max(eg);
        max_d = max_d.max(ed);
        max_b = max_b.max(eb);
    }
    GradientAuditReport {
        cases: n_cases,
        max_rel_gradient: max_g,
        max_rel_differential: max_d,
        max_rel_bearing_jacobian: max_b,
        pass: max_g < AUDIT_TOL && max_d < AUDIT_TOL && max_b < AUDIT_TOL,
    }
}

/// Finite-difference audit over seeded random cases, mixing dimensions
/// and both reshaping functions.
pub fn verify_gradients(seed: u64, n_cases: usize) -> GradientAuditReport {
    audit(seed, n_cases, true_gradient_2d)
}

fn random_unit<const D: usize>(rng: &mut ChaCha12Rng) -> UnitVector<D> {
    loop {
        let v = SVector::<f64, D>::from_fn(|_, _| rng.sample(StandardNormal));
        if v.norm() > 1e-6 {
            return Unit::new_normalize(v);
        }
    }
}

fn pair_diff<const D: usize>(rng: &mut ChaCha12Rng, rf: &dyn Reshaping) -> f64 {
    let current = BearingSet::new(vec![random_unit::<D>(rng)]);
    let home = BearingSet::new(vec![random_unit::<D>(rng)]);
    let a = gradient(&current, &home, rf).grad;
    let b = gradient_alternate(&current, &home, rf).grad;
    (a - b).amax()
}

/// Componentwise agreement of the two gradient forms on random bearing
/// pairs, no exclusions.
pub fn verify_equivalence(seed: u64, pairs: usize) -> EquivalenceReport {
    assert!(pairs >= 1, "need at least one pair");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_abs = 0.0_f64;
    for k in 0..pairs {
        let rf: &dyn Reshaping = if k % 2 == 0 { &Cosine } else { &AngleSquared };
        let d = if k % 4 == 3 {
            pair_diff::<3>(&mut rng, rf)
        } else {
            pair_diff::<2>(&mut rng, rf)
        };
        max_abs = max_abs.max(d);
    }
    EquivalenceReport {
        pairs,
        max_abs_diff: max_abs,
        pass: max_abs < EQUIVALENCE_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audit_passes_on_the_real_gradient() {
        let report = verify_gradients(7, 60);
        assert!(report.pass, "{report:?}");
        assert!(report.max_rel_gradient < 1e-5);
    }

    #[test]
    fn audit_is_reproducible() {
        assert_eq!(verify_gradients(3, 1), verify_gradients(3, 1));
        assert_eq!(verify_gradients(9, 12), verify_gradients(9, 12));
    }

    fn sign_flipped(
        current: &BearingSet<2>,
        home: &BearingSet<2>,
        rf: &dyn Reshaping,
    ) -> SVector<f64, 2> {
        let mut g = gradient(current, home, rf).grad;
        g.x = -g.x;
        g
    }

    #[test]
    fn audit_catches_a_corrupted_gradient() {
        let report = audit(7, 40, sign_flipped);
        assert!(!report.pass);
        assert!(report.max_rel_gradient > AUDIT_TOL);
        // the other two audits do not depend on the injected field
        assert!(report.max_rel_differential < AUDIT_TOL);
        assert!(report.max_rel_bearing_jacobian < AUDIT_TOL);
    }

    #[test]
    fn gradient_forms_agree() {
        let report = verify_equivalence(5, 400);
        assert!(report.pass, "{report:?}");
    }
}
