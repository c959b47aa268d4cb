//! Image encoders: raw pixels or C1-style Gabor energy with local max pooling.
//!
//! Feature layout for C1 is channel-major then row-major over the pooling
//! grid, with channel index `wavelength_index * n_orientations +
//! orientation_index`. The Gabor bank and pooling grid are both mirror-closed,
//! so horizontal image reflection acts on features as a pure index
//! permutation ([`FeatureReflection`]).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::stimuli::{OrbitSet, ViewImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Raw,
    C1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rectifier {
    Abs,
    HalfWave,
}

impl Rectifier {
    fn apply(self, v: f64) -> f64 {
        match self {
            Rectifier::Abs => v.abs(),
            Rectifier::HalfWave => v.max(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaborSpec {
    /// Evenly spaced orientations `k * pi / n`; ignored when `orientations` is set.
    pub n_orientations: usize,
    /// Explicit orientations in radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientations: Option<Vec<f64>>,
    /// Wavelengths in pixels.
    pub wavelengths: Vec<f64>,
    /// Odd kernel side length.
    pub kernel_size: usize,
    /// Carrier phase; 0 is the even (cosine) filter.
    pub phase: f64,
    /// Gaussian envelope sigma as a multiple of the wavelength.
    #[serde(default = "default_sigma_ratio")]
    pub sigma_ratio: f64,
    /// Envelope aspect ratio (gamma).
    #[serde(default = "default_aspect")]
    pub aspect_ratio: f64,
}

fn default_sigma_ratio() -> f64 {
    0.8
}

fn default_aspect() -> f64 {
    0.3
}

impl Default for GaborSpec {
    fn default() -> Self {
        GaborSpec {
            n_orientations: 4,
            orientations: None,
            wavelengths: vec![3.5, 5.0],
            kernel_size: 9,
            phase: 0.0,
            sigma_ratio: default_sigma_ratio(),
            aspect_ratio: default_aspect(),
        }
    }
}

impl GaborSpec {
    pub fn orientation_list(&self) -> Vec<f64> {
        match &self.orientations {
            Some(o) => o.clone(),
            None => (0..self.n_orientations)
                .map(|k| k as f64 * PI / self.n_orientations as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingSpec {
    pub window: usize,
    pub stride: usize,
}

impl Default for PoolingSpec {
    fn default() -> Self {
        PoolingSpec {
            window: 9,
            stride: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    #[serde(default)]
    pub gabor: GaborSpec,
    #[serde(default)]
    pub pooling: PoolingSpec,
    #[serde(default = "default_rectifier")]
    pub rectifier: Rectifier,
}

fn default_rectifier() -> Rectifier {
    Rectifier::Abs
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            kind: EncoderKind::C1,
            gabor: GaborSpec::default(),
            pooling: PoolingSpec::default(),
            rectifier: Rectifier::Abs,
        }
    }
}

impl EncoderSpec {
    pub fn raw() -> Self {
        EncoderSpec {
            kind: EncoderKind::Raw,
            ..EncoderSpec::default()
        }
    }

    pub fn c1() -> Self {
        EncoderSpec::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub encoder_fingerprint: String,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Index map `sigma` with `encode(reflect(img)) == sigma(encode(img))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureReflection {
    pub permutation: Vec<usize>,
}

impl FeatureReflection {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let n = permutation.len();
        for (i, &p) in permutation.iter().enumerate() {
            if p >= n || permutation[p] != i {
                return invalid(format!("index map is not an involution at {i}"));
            }
        }
        Ok(FeatureReflection { permutation })
    }

    /// Swap of two coordinates; handy for hand-worked 2D examples.
    pub fn swap2() -> Self {
        FeatureReflection {
            permutation: vec![1, 0],
        }
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    /// `(sigma v)[i] = v[perm[i]]`. Self-inverse.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.permutation.len());
        self.permutation.iter().map(|&p| v[p]).collect()
    }

    /// `sigma * sigma`, which must be the identity.
    pub fn compose_self(&self) -> Vec<usize> {
        self.permutation.iter().map(|&p| self.permutation[p]).collect()
    }
}

#[derive(Clone, Debug)]
struct Kernel {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel {
    fn at(&self, a: usize, b: usize) -> f64 {
        self.taps[a * self.size + b]
    }

    fn flipped(&self) -> Kernel {
        let mut taps = Vec::with_capacity(self.taps.len());
        for row in self.taps.chunks(self.size) {
            taps.extend(row.iter().rev());
        }
        Kernel {
            size: self.size,
            taps,
        }
    }
}

/// Immutable encoder bound to one image shape.
#[derive(Clone, Debug)]
pub struct Encoder {
    spec: EncoderSpec,
    height: usize,
    width: usize,
    fingerprint: String,
    kernels: Vec<Kernel>,
    orientation_partner: Vec<usize>,
    grid: Option<PoolGrid>,
}

#[derive(Clone, Copy, Debug)]
struct PoolGrid {
    rows: usize,
    cols: usize,
    row_offset: usize,
    col_offset: usize,
}

fn angle_mod_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if (PI - r) < 1e-12 {
        0.0
    } else {
        r
    }
}

/// Pair each orientation with its mirror `pi - phi`; errors list the unpaired ones.
fn mirror_pairs(orientations: &[f64]) -> Result<Vec<usize>> {
    let norm: Vec<f64> = orientations.iter().map(|&o| angle_mod_pi(o)).collect();
    let mut partner = Vec::with_capacity(norm.len());
    let mut missing = Vec::new();
    for &o in &norm {
        let target = angle_mod_pi(PI - o);
        let close = |p: f64| {
            let d = (p - target).abs();
            d.min(PI - d) < 1e-9
        };
        match norm.iter().position(|&p| close(p)) {
            Some(j) => partner.push(j),
            None => missing.push(o),
        }
    }
    if !missing.is_empty() {
        return invalid(format!(
            "orientation bank not closed under mirroring; missing partners for {missing:?} rad"
        ));
    }
    Ok(partner)
}

fn gabor_kernel(size: usize, theta: f64, lambda: f64, spec: &GaborSpec) -> Kernel {
    let h = (size / 2) as f64;
    let sigma = spec.sigma_ratio * lambda;
    let gamma2 = spec.aspect_ratio * spec.aspect_ratio;
    let (s, c) = theta.sin_cos();
    let mut taps = Vec::with_capacity(size * size);
    for a in 0..size {
        // rows point down; use an upward y so theta is counter-clockwise
        let y = h - a as f64;
        for b in 0..size {
            let x = b as f64 - h;
            let xr = x * c + y * s;
            let yr = -x * s + y * c;
            let env = (-(xr * xr + gamma2 * yr * yr) / (2.0 * sigma * sigma)).exp();
            taps.push(env * (2.0 * PI * xr / lambda + spec.phase).cos());
        }
    }
    let mean = taps.iter().sum::<f64>() / taps.len() as f64;
    taps.iter_mut().for_each(|t| *t -= mean);
    let n = crate::linalg::norm(&taps);
    if n > 0.0 {
        taps.iter_mut().for_each(|t| *t /= n);
    }
    Kernel { size, taps }
}

/// Split a self-paired kernel into its exactly symmetric or antisymmetric
/// part. The antisymmetric case needs the abs rectifier to stay a permutation.
fn mirror_pure(k: Kernel, rectifier: Rectifier) -> Result<Kernel> {
    let f = k.flipped();
    let sym: Vec<f64> = k.taps.iter().zip(&f.taps).map(|(a, b)| (a + b) / 2.0).collect();
    let anti: Vec<f64> = k.taps.iter().zip(&f.taps).map(|(a, b)| (a - b) / 2.0).collect();
    let total = crate::linalg::norm(&k.taps).max(f64::MIN_POSITIVE);
    let (ns, na) = (crate::linalg::norm(&sym), crate::linalg::norm(&anti));
    if na <= 1e-9 * total {
        Ok(Kernel { size: k.size, taps: sym })
    } else if ns <= 1e-9 * total {
        if rectifier != Rectifier::Abs {
            return invalid("odd-phase self-mirrored filter requires the abs rectifier");
        }
        Ok(Kernel { size: k.size, taps: anti })
    } else {
        invalid("Gabor phase is neither even nor odd; filters cannot be mirror-paired")
    }
}

/// Half-sample symmetric extension of index `u` into `0..n`.
fn sym_index(u: isize, n: usize) -> usize {
    let n = n as isize;
    let m = u.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Build an encoder for `height x width` images.
pub fn build_encoder(spec: &EncoderSpec, height: usize, width: usize) -> Result<Encoder> {
    if height == 0 || width.is_multiple_of(2) {
        return invalid(format!("image shape {height}x{width} must have odd width"));
    }
    let fingerprint = {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(spec)?);
        hasher.update(format!("{height}x{width}").as_bytes());
        hex::encode(&hasher.finalize()[..8])
    };
    let mut enc = Encoder {
        spec: spec.clone(),
        height,
        width,
        fingerprint,
        kernels: Vec::new(),
        orientation_partner: Vec::new(),
        grid: None,
    };
    if spec.kind == EncoderKind::Raw {
        return Ok(enc);
    }

    let g = &spec.gabor;
    if g.kernel_size.is_multiple_of(2) || g.kernel_size == 0 {
        return invalid(format!("kernel_size must be odd, got {}", g.kernel_size));
    }
    if g.wavelengths.is_empty() || g.wavelengths.iter().any(|l| !(*l > 0.0)) {
        return invalid("wavelengths must be a non-empty list of positive values");
    }
    if !(g.sigma_ratio > 0.0) || !(g.aspect_ratio > 0.0) {
        return invalid("sigma_ratio and aspect_ratio must be > 0");
    }
    let orientations = g.orientation_list();
    if orientations.is_empty() {
        return invalid("at least one orientation is required");
    }
    let partner = mirror_pairs(&orientations)?;

    let mut kernels = Vec::with_capacity(orientations.len() * g.wavelengths.len());
    for &lambda in &g.wavelengths {
        let mut bank: Vec<Option<Kernel>> = vec![None; orientations.len()];
        for (o, &theta) in orientations.iter().enumerate() {
            if bank[o].is_some() {
                continue;
            }
            let k = gabor_kernel(g.kernel_size, theta, lambda, g);
            let p = partner[o];
            if p == o {
                bank[o] = Some(mirror_pure(k, spec.rectifier)?);
            } else {
                bank[p] = Some(k.flipped());
                bank[o] = Some(k);
            }
        }
        kernels.extend(bank.into_iter().map(|k| k.expect("filled")));
    }

    let p = spec.pooling;
    if p.window == 0 || p.stride == 0 {
        return invalid("pooling window and stride must be >= 1");
    }
    if p.window > height || p.window > width {
        return invalid(format!(
            "pooling window {} larger than image {height}x{width}",
            p.window
        ));
    }
    let rows = (height - p.window) / p.stride + 1;
    let cols = (width - p.window) / p.stride + 1;
    let row_span = (rows - 1) * p.stride + p.window;
    let col_span = (cols - 1) * p.stride + p.window;
    if !(width - col_span).is_multiple_of(2) {
        return invalid(format!(
            "pooling grid (window {}, stride {}) cannot be centred on width {width}",
            p.window, p.stride
        ));
    }
    enc.grid = Some(PoolGrid {
        rows,
        cols,
        row_offset: (height - row_span) / 2,
        col_offset: (width - col_span) / 2,
    });
    enc.kernels = kernels;
    enc.orientation_partner = partner;
    Ok(enc)
}

impl Encoder {
    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn feature_dim(&self) -> usize {
        match self.grid {
            None => self.height * self.width,
            Some(g) => self.kernels.len() * g.rows * g.cols,
        }
    }

    pub fn encode(&self, img: &ViewImage) -> Result<FeatureVector> {
        if (img.height, img.width) != (self.height, self.width) {
            return invalid(format!(
                "image is {}x{}, encoder expects {}x{}",
                img.height, img.width, self.height, self.width
            ));
        }
        if img.pixels.len() != img.height * img.width {
            return invalid("pixel buffer does not match image shape");
        }
        let values = match self.grid {
            None => img.pixels.clone(),
            Some(grid) => self.c1(img, grid),
        };
        Ok(FeatureVector {
            values,
            encoder_fingerprint: self.fingerprint.clone(),
        })
    }

    pub fn encode_orbit(&self, orbit: &OrbitSet, exec: Execution) -> Result<Vec<FeatureVector>> {
        exec.try_map(&orbit.views, |v| self.encode(v))
    }

    /// Correlate with each kernel, then rectify and max-pool.
    fn c1(&self, img: &ViewImage, grid: PoolGrid) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let mut out = Vec::with_capacity(self.feature_dim());
        let mut response = vec![0.0; h * w];
        for k in &self.kernels {
            let half = (k.size / 2) as isize;
            for i in 0..h {
                for j in 0..w {
                    let mut acc = 0.0;
                    for a in 0..k.size {
                        let r = sym_index(i as isize + a as isize - half, h);
                        let row = &img.pixels[r * w..(r + 1) * w];
                        // pair column offsets +-b so mirrored inputs sum identically
                        let mut s = k.at(a, half as usize) * row[j];
                        for b in 1..=half {
                            let right = k.at(a, (half + b) as usize)
                                * row[sym_index(j as isize + b, w)];
                            let left = k.at(a, (half - b) as usize)
                                * row[sym_index(j as isize - b, w)];
                            s += right + left;
                        }
                        acc += s;
                    }
                    response[i * w + j] = self.spec.rectifier.apply(acc);
                }
            }
            let win = self.spec.pooling.window;
            let stride = self.spec.pooling.stride;
            for pi in 0..grid.rows {
                let r0 = grid.row_offset + pi * stride;
                for pj in 0..grid.cols {
                    let c0 = grid.col_offset + pj * stride;
                    let mut m = f64::NEG_INFINITY;
                    for r in r0..r0 + win {
                        for c in c0..c0 + win {
                            m = m.max(response[r * w + c]);
                        }
                    }
                    out.push(m);
                }
            }
        }
        out
    }

    /// The feature-space action of horizontal image reflection.
    pub fn feature_reflection(&self) -> FeatureReflection {
        let (h, w) = (self.height, self.width);
        let permutation = match self.grid {
            None => (0..h * w).map(|i| (i / w) * w + (w - 1 - i % w)).collect(),
            Some(g) => {
                let n_or = self.orientation_partner.len();
                let per = g.rows * g.cols;
                (0..self.feature_dim())
                    .map(|idx| {
                        let ch = idx / per;
                        let (s, o) = (ch / n_or, ch % n_or);
                        let cell = idx % per;
                        let (pi, pj) = (cell / g.cols, cell % g.cols);
                        let ch2 = s * n_or + self.orientation_partner[o];
                        ch2 * per + pi * g.cols + (g.cols - 1 - pj)
                    })
                    .collect()
            }
        };
        FeatureReflection { permutation }
    }
}
