use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::otoc::OtocSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumPoint {
    /// Refined location of the first local minimum.
    pub t_min: f64,
    /// Refined value `F̃(t_min)`.
    pub f_min: f64,
    /// Grid index of the bracketed minimum.
    pub index: usize,
    pub grid_t: f64,
    pub grid_f: f64,
}

/// First interior local minimum of sampled data, refined by the parabola
/// through the bracketing points. On a flat-bottomed minimum the earliest
/// index is taken.
pub fn first_minimum(times: &[f64], values: &[f64]) -> Result<MinimumPoint> {
    let n = times.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: values.len(),
        });
    }
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "minimum search needs at least 5 points, got {n}"
        )));
    }
    let y = values;
    let mut i = 1;
    while i + 1 < n {
        if y[i] < y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] > y[i] {
                let (t_min, f_min) = vertex(
                    [times[i - 1], times[i], times[i + 1]],
                    [y[i - 1], y[i], y[i + 1]],
                );
                return Ok(MinimumPoint {
                    t_min,
                    f_min,
                    index: i,
                    grid_t: times[i],
                    grid_f: y[i],
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Err(Error::NoMinimum)
}

/// Vertex of the parabola through three points with `y1 < y0`, `y1 <= y2`.
fn vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let f01 = (y[1] - y[0]) / (x[1] - x[0]);
    let f12 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (f12 - f01) / (x[2] - x[0]);
    if !(a > 0.0) {
        return (x[1], y[1]);
    }
    let xs = (0.5 * (x[0] + x[1]) - f01 / (2.0 * a)).clamp(x[0], x[2]);
    let ys = y[0] + f01 * (xs - x[0]) + a * (xs - x[0]) * (xs - x[1]);
    (xs, ys.min(y[1]))
}

/// First minimum of `Re F̃` for a normalized series.
pub fn find_first_minimum(s: &OtocSeries) -> Result<MinimumPoint> {
    if !s.meta.normalized {
        return Err(Error::InvalidArgument(
            "first-minimum search expects a normalized series".into(),
        ));
    }
    first_minimum(&s.times, &s.real_parts())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_minimum() {
        let t: Vec<f64> = (0..=628).map(|k| k as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|v| v.cos()).collect();
        let m = first_minimum(&t, &y).unwrap();
        assert!((m.t_min - std::f64::consts::PI).abs() < 1e-3);
        assert!((m.f_min + 1.0).abs() < 1e-3);
    }

    #[test]
    fn monotone_has_none() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| -v).collect();
        assert!(matches!(first_minimum(&t, &y), Err(Error::NoMinimum)));
    }

    #[test]
    fn plateau_takes_earliest_index() {
        let t: Vec<f64> = (0..7).map(|k| k as f64).collect();
        let y = [3.0, 2.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let m = first_minimum(&t, &y).unwrap();
        assert_eq!(m.index, 2);
        assert!(m.f_min <= 1.0);
    }

    #[test]
    fn plateau_at_the_end_is_not_a_minimum() {
        let t: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let y = [3.0, 2.0, 1.0, 1.0, 1.0, 1.0];
        assert!(matches!(first_minimum(&t, &y), Err(Error::NoMinimum)));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            first_minimum(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn exact_parabola_vertex() {
        let t: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = t.iter().map(|v| (v - 1.3).powi(2) + 0.2).collect();
        let m = first_minimum(&t, &y).unwrap();
        assert!((m.t_min - 1.3).abs() < 1e-12);
        assert!((m.f_min - 0.2).abs() < 1e-12);
    }
}
