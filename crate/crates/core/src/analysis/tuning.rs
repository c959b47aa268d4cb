//! Orientation tuning curves and their mirror-symmetry index.

use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{invalid, Result};
use crate::learning::LearnedBasis;
use crate::linalg::dot;
use crate::signature::{simple_responses, Nonlinearity, SignatureSpec};
use crate::stimuli::{render_view, AngleGrid, FaceModel3D, RenderOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitLabel {
    /// Template identity the unit belongs to.
    pub identity: u64,
    /// Row within that identity's basis.
    pub component: usize,
    pub stage: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningCurve {
    pub angles: Vec<f64>,
    pub responses: Vec<f64>,
    pub label: UnitLabel,
}

/// For each angle, the index of its negation; `None` if the grid is not closed.
pub(crate) fn mirror_indices(angles: &[f64]) -> Option<Vec<usize>> {
    angles
        .iter()
        .map(|a| angles.iter().position(|b| (a + b).abs() <= 1e-9))
        .collect()
}

/// `response(theta) = eta(<encode(render(face, theta)), unit>)` over a symmetric grid.
pub fn tuning_curve(
    unit: &[f64],
    face: &FaceModel3D,
    grid: AngleGrid,
    encoder: &Encoder,
    render: &RenderOptions,
    eta: Nonlinearity,
) -> Result<TuningCurve> {
    let angles = grid.angles()?;
    if mirror_indices(&angles).is_none() {
        return invalid("tuning curves need an angle grid symmetric about 0");
    }
    let mut responses = Vec::with_capacity(angles.len());
    for &a in &angles {
        let x = encoder.encode(&render_view(face, a, render)?)?;
        if x.len() != unit.len() {
            return invalid(format!(
                "unit has dimension {}, features have {}",
                unit.len(),
                x.len()
            ));
        }
        responses.push(eta.apply(dot(&x.values, unit)));
    }
    Ok(TuningCurve {
        angles,
        responses,
        label: UnitLabel {
            identity: face.identity_id,
            component: 0,
            stage: "simple".into(),
        },
    })
}

/// Simple-stage tuning curves of every unit of `basis`, probed with views of
/// `face`. Inputs go through the same standardization/whitening as the
/// signature pipeline.
pub fn basis_tuning_curves(
    basis: &LearnedBasis,
    features_by_angle: &[(f64, Vec<f64>)],
    spec: &SignatureSpec,
) -> Result<Vec<TuningCurve>> {
    let angles: Vec<f64> = features_by_angle.iter().map(|(a, _)| *a).collect();
    if mirror_indices(&angles).is_none() {
        return invalid("tuning curves need an angle grid symmetric about 0");
    }
    let mut per_unit = vec![Vec::with_capacity(angles.len()); basis.len()];
    for (_, x) in features_by_angle {
        let r = simple_responses(x, std::slice::from_ref(basis), spec)?;
        for (u, v) in r.rows[0].iter().enumerate() {
            per_unit[u].push(*v);
        }
    }
    Ok(per_unit
        .into_iter()
        .enumerate()
        .map(|(component, responses)| TuningCurve {
            angles: angles.clone(),
            responses,
            label: UnitLabel {
                identity: basis.identity_id,
                component,
                stage: "simple".into(),
            },
        })
        .collect())
}

/// `(sum e^2 - sum o^2) / (sum e^2 + sum o^2)` for the even/odd split of the
/// curve about 0 deg. All-zero curves score 1.
pub fn symmetry_index(curve: &TuningCurve) -> Result<f64> {
    if curve.angles.len() != curve.responses.len() {
        return invalid("angles and responses differ in length");
    }
    let Some(mirror) = mirror_indices(&curve.angles) else {
        return invalid("symmetry index needs an angle grid symmetric about 0");
    };
    let f = &curve.responses;
    let (mut even, mut odd) = (0.0, 0.0);
    for (i, &j) in mirror.iter().enumerate() {
        let e = 0.5 * (f[i] + f[j]);
        let o = 0.5 * (f[i] - f[j]);
        even += e * e;
        odd += o * o;
    }
    if even + odd == 0.0 {
        return Ok(1.0);
    }
    Ok((even - odd) / (even + odd))
}

/// `max |f(theta) - f(-theta)| / max |f|` (0 for an all-zero curve).
pub fn mirror_asymmetry(curve: &TuningCurve) -> Result<f64> {
    let Some(mirror) = mirror_indices(&curve.angles) else {
        return invalid("asymmetry needs an angle grid symmetric about 0");
    };
    let f = &curve.responses;
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(0.0);
    }
    let worst = mirror
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (i, &j)| m.max((f[i] - f[j]).abs()));
    Ok(worst / peak)
}
