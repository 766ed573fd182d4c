//! Winding count of a closed polyline around a point.

use num_complex::Complex64;

use super::StabilityError;

/// Polyline vertices closer to the center than this make the winding count
/// ill-defined and are rejected.
pub const VERTEX_DISTANCE_MIN: f64 = 1e-9;
/// Largest tolerated gap between the accumulated turn count and an integer.
pub const WINDING_RESIDUE_MAX: f64 = 0.01;

/// Clockwise-positive winding number of the closed polyline around `center`.
///
/// The polyline closes cyclically (last vertex connects back to the first).
/// Consecutive radius vectors must subtend less than π — the contour tracer's
/// angle criterion guarantees that — otherwise a step would alias. The signed
/// turn angles accumulate counterclockwise-positive; the result is negated so
/// that clockwise encirclements count positive, matching Z = N + P.
pub fn winding_number(polyline: &[Complex64], center: Complex64) -> Result<i32, StabilityError> {
    assert!(polyline.len() >= 3, "winding needs at least 3 vertices");
    for (index, vertex) in polyline.iter().enumerate() {
        let dist = (vertex - center).norm();
        if dist < VERTEX_DISTANCE_MIN {
            return Err(StabilityError::VertexAtCenter { index, dist });
        }
    }
    let mut total = 0.0_f64;
    for k in 0..polyline.len() {
        let a = polyline[k] - center;
        let b = polyline[(k + 1) % polyline.len()] - center;
        let cross = a.re * b.im - a.im * b.re;
        let dot = a.re * b.re + a.im * b.im;
        total += cross.atan2(dot);
    }
    let turns = total / (2.0 * std::f64::consts::PI);
    let nearest = turns.round();
    let residue = (turns - nearest).abs();
    if residue >= WINDING_RESIDUE_MAX {
        return Err(StabilityError::UnderResolved { residue });
    }
    Ok(-(nearest as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Complex64> {
        vec![
            Complex64::new(1.0, -1.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(-1.0, 1.0),
            Complex64::new(-1.0, -1.0),
        ]
    }

    #[test]
    fn counterclockwise_square_counts_minus_one() {
        let n = winding_number(&square(), Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(n, -1);
    }

    #[test]
    fn clockwise_square_counts_plus_one() {
        let mut poly = square();
        poly.reverse();
        let n = winding_number(&poly, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn far_center_counts_zero() {
        let n = winding_number(&square(), Complex64::new(5.0, 5.0)).unwrap();
        assert_eq!(n, 0);
    }

    #[test]
    fn vertex_on_center_is_rejected() {
        let mut poly = square();
        poly.push(Complex64::new(0.0, 0.0));
        match winding_number(&poly, Complex64::new(0.0, 0.0)) {
            Err(StabilityError::VertexAtCenter { index: 4, .. }) => {}
            other => panic!("expected VertexAtCenter, got {other:?}"),
        }
    }
}
