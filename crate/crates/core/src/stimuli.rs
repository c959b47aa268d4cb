//! Procedural bilaterally symmetric "faces", depth-rotated views and orbits.
//!
//! A face is a cloud of isotropic Gaussian blobs that is closed under the
//! mirror map `x -> -x`. Views are produced by rotating about the vertical
//! axis and projecting onto the image plane. Image width is always odd so the
//! image midline is a pixel column and horizontal reflection is an exact
//! permutation of pixels.
//!
//! Rendering sums each mirror pair's two contributions before adding them to
//! the pixel total. Floating-point addition is commutative, so
//! `render(theta) == reflect(render(-theta))` holds bit-for-bit under the
//! orthographic projection, not merely to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobFeature {
    /// Model-space position `(x, y, z)`; `x` is left/right, `y` up, `z` toward the viewer.
    pub position: [f64; 3],
    pub amplitude: f64,
    pub width: f64,
}

impl BlobFeature {
    fn mirrored(&self) -> BlobFeature {
        let [x, y, z] = self.position;
        BlobFeature {
            position: [-x, y, z],
            ..*self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceModel3D {
    pub identity_id: u64,
    pub features: Vec<BlobFeature>,
    pub seed: u64,
}

impl FaceModel3D {
    /// Validating constructor: widths positive, amplitudes non-negative,
    /// at least four features, and closed under the mirror map.
    pub fn new(identity_id: u64, features: Vec<BlobFeature>, seed: u64) -> Result<Self> {
        let model = FaceModel3D {
            identity_id,
            features,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() < 4 {
            return invalid(format!(
                "face needs at least 4 features, got {}",
                self.features.len()
            ));
        }
        for (i, f) in self.features.iter().enumerate() {
            if !(f.width > 0.0) || !f.width.is_finite() {
                return invalid(format!("feature {i}: width must be > 0"));
            }
            if !(f.amplitude >= 0.0) || !f.amplitude.is_finite() {
                return invalid(format!("feature {i}: amplitude must be >= 0"));
            }
            if f.position.iter().any(|p| !p.is_finite()) {
                return invalid(format!("feature {i}: non-finite position"));
            }
        }
        if self.mirror_partners().is_none() {
            return invalid("face is not bilaterally symmetric");
        }
        Ok(())
    }

    /// For each feature, the index of its mirror image (itself for midline
    /// features). `None` when the model is not exactly symmetric.
    pub fn mirror_partners(&self) -> Option<Vec<usize>> {
        let n = self.features.len();
        let mut partner = vec![usize::MAX; n];
        for i in 0..n {
            if partner[i] != usize::MAX {
                continue;
            }
            let m = self.features[i].mirrored();
            if self.features[i].position[0] == 0.0 {
                partner[i] = i;
                continue;
            }
            let j = (0..n).find(|&j| j != i && partner[j] == usize::MAX && self.features[j] == m)?;
            partner[i] = j;
            partner[j] = i;
        }
        Some(partner)
    }

    pub fn is_symmetric(&self) -> bool {
        self.mirror_partners().is_some()
    }

    /// Largest distance of any feature from the vertical rotation axis.
    /// Invariant under rotation about that axis.
    fn axial_radius(&self) -> f64 {
        self.features
            .iter()
            .map(|f| f.position[0].hypot(f.position[2]))
            .fold(0.0, f64::max)
    }
}

/// Generate a random symmetric face. Features are placed on the front of a
/// head-like ellipsoid of radius `spread`; `n_features / 2` mirror pairs plus
/// one midline feature when `n_features` is odd.
pub fn generate_face(seed: u64, n_features: usize, spread: f64) -> Result<FaceModel3D> {
    if n_features < 4 {
        return invalid(format!("n_features must be >= 4, got {n_features}"));
    }
    if !(spread > 0.0) || !spread.is_finite() {
        return invalid(format!("spread must be > 0, got {spread}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let surface_z = |rng: &mut ChaCha8Rng, x: f64, y: f64| {
        let u = (1.0 - x * x - 0.5 * y * y).max(0.05);
        u.sqrt() * rng.random_range(0.75..1.0)
    };
    let mut features = Vec::with_capacity(n_features);
    for _ in 0..n_features / 2 {
        let x = rng.random_range(0.15..0.85);
        let y = rng.random_range(-0.8..0.8);
        let z = surface_z(&mut rng, x, y);
        let f = BlobFeature {
            position: [x * spread, y * spread, z * spread],
            amplitude: rng.random_range(0.4..1.0),
            width: rng.random_range(0.08..0.22) * spread,
        };
        features.push(f);
        features.push(f.mirrored());
    }
    if n_features % 2 == 1 {
        let y = rng.random_range(-0.8..0.8);
        let z = surface_z(&mut rng, 0.0, y);
        features.push(BlobFeature {
            position: [0.0, y * spread, z * spread],
            amplitude: rng.random_range(0.4..1.0),
            width: rng.random_range(0.08..0.22) * spread,
        });
    }
    Ok(FaceModel3D {
        identity_id: seed,
        features,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Projection {
    Orthographic,
    /// Pinhole camera on the `z` axis at `camera_distance` model units.
    Perspective { camera_distance: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    pub height: usize,
    pub width: usize,
    /// Nearer features are brightened by `1 + depth_cue * normalized_depth`.
    pub depth_cue: f64,
    /// Model units visible between the image centre and the left/right edge.
    pub field_of_view: f64,
    pub projection: Projection,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            height: 32,
            width: 33,
            depth_cue: 0.5,
            field_of_view: 1.3,
            projection: Projection::Orthographic,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 {
            return invalid("image height must be >= 1");
        }
        if self.width.is_multiple_of(2) {
            return invalid(format!(
                "image width must be odd for exact reflection, got {}",
                self.width
            ));
        }
        if !(self.depth_cue >= 0.0) {
            return invalid("depth_cue must be >= 0");
        }
        if !(self.field_of_view > 0.0) {
            return invalid("field_of_view must be > 0");
        }
        if let Projection::Perspective { camera_distance } = self.projection {
            if !(camera_distance > 0.0) {
                return invalid("camera_distance must be > 0");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewImage {
    pub height: usize,
    pub width: usize,
    /// Row-major, values in `[0, 1]`.
    pub pixels: Vec<f64>,
    pub angle_deg: f64,
    pub identity_id: u64,
}

impl ViewImage {
    pub fn new(
        height: usize,
        width: usize,
        pixels: Vec<f64>,
        angle_deg: f64,
        identity_id: u64,
    ) -> Result<Self> {
        if width.is_multiple_of(2) || height == 0 {
            return invalid(format!("bad image shape {height}x{width} (width must be odd)"));
        }
        if pixels.len() != height * width {
            return invalid("pixel count does not match shape");
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return invalid("pixels must be finite and in [0, 1]");
        }
        Ok(ViewImage {
            height,
            width,
            pixels,
            angle_deg,
            identity_id,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

/// Horizontal flip about the central column.
pub fn reflect_image(img: &ViewImage) -> ViewImage {
    let w = img.width;
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for row in img.pixels.chunks(w) {
        pixels.extend(row.iter().rev());
    }
    ViewImage {
        pixels,
        angle_deg: -img.angle_deg,
        ..img.clone()
    }
}

struct ProjectedBlob {
    col: f64,
    row: f64,
    amplitude: f64,
    inv_two_var: f64,
}

/// Render `model` rotated by `angle_deg` about the vertical axis.
pub fn render_view(model: &FaceModel3D, angle_deg: f64, opts: &RenderOptions) -> Result<ViewImage> {
    opts.validate()?;
    if !(angle_deg.abs() <= 180.0) {
        return invalid(format!("angle must be within [-180, 180], got {angle_deg}"));
    }
    let partners = model
        .mirror_partners()
        .ok_or_else(|| Error::InvalidArgument("face is not bilaterally symmetric".into()))?;

    let (h, w) = (opts.height, opts.width);
    let cx = ((w - 1) / 2) as f64;
    let cy = (h as f64 - 1.0) / 2.0;
    let px_per_unit = cx.max(1.0) / opts.field_of_view;
    let radius = model.axial_radius();
    let theta = angle_deg.to_radians();
    let (s, c) = (theta.sin(), theta.cos());

    let blobs: Vec<ProjectedBlob> = model
        .features
        .iter()
        .map(|f| {
            let [x, y, z] = f.position;
            let xr = x * c + z * s;
            let zr = z * c - x * s;
            let depth = if radius > 0.0 {
                0.5 * (zr / radius + 1.0)
            } else {
                0.5
            };
            let (mag, xr, y) = match opts.projection {
                Projection::Orthographic => (1.0, xr, y),
                Projection::Perspective { camera_distance } => {
                    let m = camera_distance / (camera_distance - zr).max(1e-6);
                    (m, xr * m, y * m)
                }
            };
            let sigma = f.width * mag * px_per_unit;
            ProjectedBlob {
                col: xr * px_per_unit,
                row: y * px_per_unit,
                amplitude: f.amplitude * (1.0 + opts.depth_cue * depth),
                inv_two_var: 1.0 / (2.0 * sigma * sigma),
            }
        })
        .collect();

    let contribution = |b: &ProjectedBlob, dx: f64, dy: f64| {
        let u = dx - b.col;
        let v = dy - b.row;
        b.amplitude * (-(u * u + v * v) * b.inv_two_var).exp()
    };

    let mut pixels = vec![0.0; h * w];
    for r in 0..h {
        // image rows grow downward, model y grows upward
        let dy = cy - r as f64;
        for col in 0..w {
            let dx = col as f64 - cx;
            let mut acc = 0.0;
            for (i, b) in blobs.iter().enumerate() {
                let j = partners[i];
                if j < i {
                    continue;
                }
                let mut term = contribution(b, dx, dy);
                if j != i {
                    term += contribution(&blobs[j], dx, dy);
                }
                acc += term;
            }
            pixels[r * w + col] = acc;
        }
    }
    let max = pixels.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        pixels.iter_mut().for_each(|p| *p /= max);
    }
    Ok(ViewImage {
        height: h,
        width: w,
        pixels,
        angle_deg,
        identity_id: model.identity_id,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngleGrid {
    pub min_deg: f64,
    pub max_deg: f64,
    pub step_deg: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid {
            min_deg: -95.0,
            max_deg: 95.0,
            step_deg: 5.0,
        }
    }
}

impl AngleGrid {
    pub fn new(min_deg: f64, max_deg: f64, step_deg: f64) -> Self {
        AngleGrid {
            min_deg,
            max_deg,
            step_deg,
        }
    }

    /// Grid angles in increasing order. For grids closed under negation the
    /// returned values are exact negatives of each other.
    pub fn angles(&self) -> Result<Vec<f64>> {
        let AngleGrid {
            min_deg,
            max_deg,
            step_deg,
        } = *self;
        if !(step_deg > 0.0) || !min_deg.is_finite() || !max_deg.is_finite() || min_deg > max_deg {
            return invalid(format!(
                "empty angle grid ({min_deg}..{max_deg} step {step_deg})"
            ));
        }
        let n = ((max_deg - min_deg) / step_deg + 1e-9).floor() as usize + 1;
        let mut angles: Vec<f64> = (0..n).map(|i| min_deg + i as f64 * step_deg).collect();
        if Self::closed_under_negation(&angles, step_deg) {
            for i in 0..n / 2 {
                angles[n - 1 - i] = -angles[i];
            }
            if n % 2 == 1 {
                angles[n / 2] = 0.0;
            }
        }
        Ok(angles)
    }

    fn closed_under_negation(angles: &[f64], step: f64) -> bool {
        let n = angles.len();
        (0..n).all(|i| (angles[i] + angles[n - 1 - i]).abs() <= 1e-9 * step.max(1.0))
    }

    pub fn is_symmetric(&self) -> bool {
        self.angles()
            .map(|a| Self::closed_under_negation(&a, self.step_deg))
            .unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSet {
    pub identity_id: u64,
    pub angle_grid: AngleGrid,
    pub reflection_closed: bool,
    pub views: Vec<ViewImage>,
}

impl OrbitSet {
    pub fn angles(&self) -> Vec<f64> {
        self.views.iter().map(|v| v.angle_deg).collect()
    }

    /// Index of the view at `-angle`, if present.
    pub fn mirror_index(&self, i: usize) -> Option<usize> {
        let a = -self.views[i].angle_deg;
        self.views.iter().position(|v| v.angle_deg == a)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let orbit: OrbitSet = serde_json::from_str(s)?;
        for v in &orbit.views {
            ViewImage::new(v.height, v.width, v.pixels.clone(), v.angle_deg, v.identity_id)?;
        }
        Ok(orbit)
    }
}

/// Render `model` at every grid angle.
pub fn build_orbit(model: &FaceModel3D, grid: AngleGrid, opts: &RenderOptions) -> Result<OrbitSet> {
    let angles = grid.angles()?;
    let views = angles
        .iter()
        .map(|&a| render_view(model, a, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitSet {
        identity_id: model.identity_id,
        angle_grid: grid,
        reflection_closed: grid.is_symmetric(),
        views,
    })
}
