//! How much a representation changes within local viewing windows.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRange {
    pub center: f64,
    /// Largest `(max - min) / |mean|` over components inside the window.
    pub relative_range: f64,
}

/// Slide a window of half-width `window_deg` over the grid, keeping only
/// windows that fit entirely inside it.
pub fn invariance_profile(orbit: &[(f64, Vec<f64>)], window_deg: f64) -> Result<Vec<WindowRange>> {
    if orbit.is_empty() {
        return invalid("empty orbit");
    }
    if !(window_deg >= 0.0) {
        return invalid("window must be non-negative");
    }
    let d = orbit[0].1.len();
    if orbit.iter().any(|(_, v)| v.len() != d) {
        return invalid("all orbit vectors need the same dimension");
    }
    let lo = orbit.iter().map(|(a, _)| *a).fold(f64::INFINITY, f64::min);
    let hi = orbit.iter().map(|(a, _)| *a).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9;
    let mut out = Vec::new();
    for &(c, _) in orbit {
        if c - window_deg < lo - tol || c + window_deg > hi + tol {
            continue;
        }
        let members: Vec<&Vec<f64>> = orbit
            .iter()
            .filter(|(a, _)| (a - c).abs() <= window_deg + tol)
            .map(|(_, v)| v)
            .collect();
        let mut worst = 0.0f64;
        for k in 0..d {
            let (mut mn, mut mx, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for v in &members {
                mn = mn.min(v[k]);
                mx = mx.max(v[k]);
                sum += v[k];
            }
            let range = mx - mn;
            if range > 0.0 {
                let mean = (sum / members.len() as f64).abs();
                worst = worst.max(if mean > 0.0 { range / mean } else { f64::INFINITY });
            }
        }
        out.push(WindowRange {
            center: c,
            relative_range: worst,
        });
    }
    if out.is_empty() {
        return invalid(format!(
            "a window of +-{window_deg} deg does not fit inside [{lo}, {hi}]"
        ));
    }
    Ok(out)
}
