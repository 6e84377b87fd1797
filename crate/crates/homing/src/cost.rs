//! The homing cost, its range-free gradient, its position differential, and
//! its differential with respect to the stored home bearings.
//!
//! Per landmark i the cost term is phi_i = d_i * f(c_i) with c_i the cosine
//! between the current bearing b_i and the home bearing g_i. The gradient
//! needs bearings only:
//!
//!   grad phi_i = -f(c_i) b_i - f'(c_i) P_{b_i} g_i
//!
//! and that range-freeness is enforced here by the signature of [`gradient`],
//! which accepts two bearing sets and nothing else. Ranges reappear only in
//! the cost value and in the position differential.

use nalgebra::{SMatrix, SVector};

use crate::error::HomingError;
use crate::geometry::{
    bearing, cosine_alignment, range, BearingSet, Point, Scene, UnitVector, MIN_LANDMARK_DISTANCE,
};
use crate::reshaping::Reshaping;

/// Tangential directions shorter than this are treated as undefined
/// (current and home bearing exactly parallel or antiparallel).
pub const TANGENT_EPS: f64 = 1e-12;

/// Cost value with its per-landmark terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEvaluation {
    pub phi: f64,
    pub per_term: Vec<f64>,
}

/// Gradient with its per-landmark terms.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEvaluation<const D: usize> {
    pub grad: SVector<f64, D>,
    pub per_term: Vec<SVector<f64, D>>,
    /// Indices of antipodal bearing pairs whose tangential direction is
    /// undefined; their tangential contribution was dropped.
    pub degenerate_tangents: Vec<usize>,
}

/// Position Jacobian of the gradient field with its per-landmark terms.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientDifferential<const D: usize> {
    pub matrix: SMatrix<f64, D, D>,
    pub per_term: Vec<SMatrix<f64, D, D>>,
}

/// phi(x) = sum_i d_i(x) * f(c_i(x)). Needs ranges, so it is a diagnostic
/// for the simulator, not an input to any controller.
pub fn cost<const D: usize, R: Reshaping + ?Sized>(
    scene: &Scene<D>,
    home_bearings: &BearingSet<D>,
    x: &Point<D>,
    rf: &R,
) -> Result<CostEvaluation, HomingError> {
    assert_eq!(home_bearings.len(), scene.len(), "bearing set mismatch");
    let mut per_term = Vec::with_capacity(scene.len());
    let mut phi = 0.0;
    for (i, landmark) in scene.landmarks().iter().enumerate() {
        let d = range(x, landmark);
        if !(d > MIN_LANDMARK_DISTANCE) {
            return Err(HomingError::LandmarkCollision {
                index: i,
                distance: d,
                min_distance: MIN_LANDMARK_DISTANCE,
            });
        }
        let b = bearing(x, landmark).expect("separation just checked");
        let c = cosine_alignment(&home_bearings[i], &b);
        let term = d * rf.eval(c).f;
        phi += term;
        per_term.push(term);
    }
    Ok(CostEvaluation { phi, per_term })
}

/// Per-landmark gradient term in the numerically stable split form: the
/// radial part -f(c) b plus the tangential part with its bounded magnitude
/// f'(c) sqrt(1-c^2) applied along the unit tangent.
fn gradient_term<const D: usize, R: Reshaping + ?Sized>(
    current: &UnitVector<D>,
    home: &UnitVector<D>,
    rf: &R,
) -> (SVector<f64, D>, bool) {
    let c = cosine_alignment(home, current);
    let f = rf.eval(c).f;
    let tangent = home.as_ref() - c * current.as_ref(); // P_b g
    let s = tangent.norm();
    let mut term = -f * current.as_ref();
    let mut degenerate = false;
    if s >= TANGENT_EPS {
        term -= rf.tangent_gain(c) / s * tangent;
    } else if c < 0.0 {
        // exact antipode: tangent direction undefined, radial part exact
        degenerate = true;
    }
    (term, degenerate)
}

/// grad phi from bearings alone. The two sets must be index-aligned.
pub fn gradient<const D: usize, R: Reshaping + ?Sized>(
    current: &BearingSet<D>,
    home: &BearingSet<D>,
    rf: &R,
) -> GradientEvaluation<D> {
    assert_eq!(current.len(), home.len(), "bearing set mismatch");
    let mut per_term = Vec::with_capacity(current.len());
    let mut degenerate_tangents = Vec::new();
    let mut grad = SVector::<f64, D>::zeros();
    for i in 0..current.len() {
        let (term, degenerate) = gradient_term(&current[i], &home[i], rf);
        if degenerate {
            degenerate_tangents.push(i);
        }
        grad += term;
        per_term.push(term);
    }
    GradientEvaluation {
        grad,
        per_term,
        degenerate_tangents,
    }
}

/// The algebraically equivalent expression
/// grad phi_i = (f'(c) c - f(c)) b_i - f'(c) g_i, kept as an independent
/// route for equivalence checks.
pub fn gradient_alternate<const D: usize, R: Reshaping + ?Sized>(
    current: &BearingSet<D>,
    home: &BearingSet<D>,
    rf: &R,
) -> GradientEvaluation<D> {
    assert_eq!(current.len(), home.len(), "bearing set mismatch");
    let mut per_term = Vec::with_capacity(current.len());
    let mut grad = SVector::<f64, D>::zeros();
    for i in 0..current.len() {
        let c = cosine_alignment(&home[i], &current[i]);
        let r = rf.eval(c);
        let term = (r.df * c - r.f) * current[i].as_ref() - r.df * home[i].as_ref();
        grad += term;
        per_term.push(term);
    }
    GradientEvaluation {
        grad,
        per_term,
        degenerate_tangents: Vec::new(),
    }
}

/// Bearing-only factor H_i of the per-landmark gradient differential:
///
///   H_i = (f''(c)(c b_i - g_i) g_i^T + (f'(c) c - f(c)) I) P_{b_i}
///
/// Computable without ranges, which is what lets the unicycle controller
/// use it. The position Jacobian term for landmark i is -H_i / d_i.
pub fn coupling_matrices<const D: usize, R: Reshaping + ?Sized>(
    current: &BearingSet<D>,
    home: &BearingSet<D>,
    rf: &R,
) -> Vec<SMatrix<f64, D, D>> {
    assert_eq!(current.len(), home.len(), "bearing set mismatch");
    let identity = SMatrix::<f64, D, D>::identity();
    (0..current.len())
        .map(|i| {
            let b = current[i].as_ref();
            let g = home[i].as_ref();
            let c = cosine_alignment(&home[i], &current[i]);
            let r = rf.eval(c);
            let projector = identity - b * b.transpose();
            (r.ddf * (c * b - g) * g.transpose() + (r.df * c - r.f) * identity) * projector
        })
        .collect()
}

/// Position Jacobian of the gradient field at `x`: sum_i -H_i / d_i.
pub fn gradient_differential<const D: usize, R: Reshaping + ?Sized>(
    scene: &Scene<D>,
    x: &Point<D>,
    home_bearings: &BearingSet<D>,
    rf: &R,
) -> Result<GradientDifferential<D>, HomingError> {
    assert_eq!(home_bearings.len(), scene.len(), "bearing set mismatch");
    let current = scene.bearings_at(x)?;
    let ranges = scene.ranges_at(x);
    let couplings = coupling_matrices(&current, home_bearings, rf);
    let mut matrix = SMatrix::<f64, D, D>::zeros();
    let per_term: Vec<_> = couplings
        .into_iter()
        .zip(&ranges)
        .map(|(h, d)| {
            let term = -h / *d;
            matrix += term;
            term
        })
        .collect();
    Ok(GradientDifferential { matrix, per_term })
}

/// Differential of the per-landmark gradient term with respect to the home
/// bearing it is steering toward:
///
///   -f'(c) I - f''(c) (I - b b^T) g b^T
pub fn bearing_jacobian<const D: usize, R: Reshaping + ?Sized>(
    current: &UnitVector<D>,
    home: &UnitVector<D>,
    rf: &R,
) -> SMatrix<f64, D, D> {
    let b = current.as_ref();
    let g = home.as_ref();
    let c = cosine_alignment(home, current);
    let r = rf.eval(c);
    let tangent = g - c * b; // (I - b b^T) g
    -r.df * SMatrix::<f64, D, D>::identity() - r.ddf * tangent * b.transpose()
}

/// Derivative of the cost term `term` along the ray x(t) = home + t v,
/// computed as the inner product of the term's gradient with v.
pub fn line_derivative<const D: usize, R: Reshaping + ?Sized>(
    scene: &Scene<D>,
    home_bearings: &BearingSet<D>,
    v: &UnitVector<D>,
    t: f64,
    rf: &R,
    term: usize,
) -> Result<f64, HomingError> {
    assert!(term < scene.len(), "landmark index out of range");
    assert!(t >= 0.0, "ray parameter must be non-negative");
    let x = scene.home() + t * v.as_ref();
    let landmark = &scene.landmarks()[term];
    let d = range(&x, landmark);
    if !(d > MIN_LANDMARK_DISTANCE) {
        return Err(HomingError::LandmarkCollision {
            index: term,
            distance: d,
            min_distance: MIN_LANDMARK_DISTANCE,
        });
    }
    let b = bearing(&x, landmark).expect("separation just checked");
    let (grad_term, _) = gradient_term(&b, &home_bearings[term], rf);
    Ok(grad_term.dot(v))
}
