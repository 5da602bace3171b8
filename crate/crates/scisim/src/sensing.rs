//! The coded-aperture hardware encoder in software.
//!
//! Every window of B frames is modulated by the first B planes of a fixed
//! binary mask stack and summed into a single measurement frame:
//!
//! ```text
//!     Y = sum_b C_b .* X_b + Z,     Z ~ N(0, sigma^2) i.i.d.
//! ```
//!
//! The vectorized form `y = [D_1 ... D_B] x` (each `D_b` the diagonal of a
//! flattened mask plane) is exposed as [`SensingOperator`]; its Gram matrix
//! `H H^T` is diagonal with the per-pixel mask column sums on the diagonal,
//! which is what makes both normalization and the projection step of the
//! reconstruction cheap.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::video::VideoCube;

/// A fixed stack of binary modulation patterns. A prefix of length B
/// realizes compression ratio B, so changing B mid-stream never requires
/// re-synchronizing patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStack {
    planes: Array3<u8>, // (bmax, h, w), strictly 0/1
    seed: u64,
}

impl MaskStack {
    /// Builds a stack from explicit planes, validating binarity.
    /// The prefix invariant is NOT enforced here; use `validate_prefixes`.
    pub fn from_planes(planes: Array3<u8>, seed: u64) -> Result<Self> {
        let (b, h, w) = planes.dim();
        if b == 0 || h == 0 || w == 0 {
            return Err(Error::validation("mask stack must have nonzero dimensions"));
        }
        if planes.iter().any(|&v| v > 1) {
            return Err(Error::validation("mask values must be 0 or 1"));
        }
        Ok(Self { planes, seed })
    }

    pub fn bmax(&self) -> usize {
        self.planes.dim().0
    }

    pub fn height(&self) -> usize {
        self.planes.dim().1
    }

    pub fn width(&self) -> usize {
        self.planes.dim().2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn planes(&self) -> &Array3<u8> {
        &self.planes
    }

    pub fn plane(&self, b: usize) -> ndarray::ArrayView2<'_, u8> {
        self.planes.index_axis(ndarray::Axis(0), b)
    }

    /// Per-pixel sum of the first `b` planes (the diagonal of `H H^T`).
    pub fn column_sums(&self, b: usize) -> Result<Array2<f64>> {
        if b == 0 || b > self.bmax() {
            return Err(Error::validation(format!("prefix length {b} outside 1..={}", self.bmax())));
        }
        let (_, h, w) = self.planes.dim();
        let mut sums = Array2::zeros((h, w));
        for plane in self.planes.axis_iter(ndarray::Axis(0)).take(b) {
            for (s, &m) in sums.iter_mut().zip(plane.iter()) {
                *s += m as f64;
            }
        }
        Ok(sums)
    }

    /// Checks that every pixel is active at least once within the prefix of
    /// every B in `state_set`.
    pub fn validate_prefixes(&self, state_set: &[usize]) -> Result<()> {
        for &b in state_set {
            let sums = self.column_sums(b)?;
            if sums.iter().any(|&s| s < 1.0) {
                return Err(Error::validation(format!(
                    "mask stack has a dark pixel within the length-{b} prefix"
                )));
            }
        }
        Ok(())
    }

    /// Identity string used to check that logs being compared were produced
    /// with the same masks.
    pub fn identity(&self) -> String {
        format!("masks-{}x{}x{}-seed{}", self.height(), self.width(), self.bmax(), self.seed)
    }
}

/// Draws each mask entry i.i.d. Bernoulli(0.5) from a seeded generator,
/// then repairs dark pixels: any pixel inactive across the shortest prefix
/// `Bmin = min(state_set)` gets one uniformly chosen plane in `1..=Bmin`
/// forced to 1, which guarantees the prefix invariant for every B >= Bmin.
pub fn generate_masks(
    nx: usize,
    ny: usize,
    bmax: usize,
    seed: u64,
    state_set: &[usize],
) -> Result<MaskStack> {
    if nx == 0 || ny == 0 || bmax == 0 {
        return Err(Error::validation("mask dimensions must be positive"));
    }
    if state_set.is_empty() {
        return Err(Error::validation("state set must be non-empty"));
    }
    let bmin = *state_set.iter().min().unwrap();
    if bmin == 0 {
        return Err(Error::validation("state set values must be >= 1"));
    }
    if *state_set.iter().max().unwrap() > bmax {
        return Err(Error::validation(format!("state set exceeds mask depth {bmax}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planes = Array3::zeros((bmax, nx, ny));
    for v in planes.iter_mut() {
        *v = rng.gen_bool(0.5) as u8;
    }
    for i in 0..nx {
        for j in 0..ny {
            let dark = (0..bmin).all(|b| planes[(b, i, j)] == 0);
            if dark {
                let b = rng.gen_range(0..bmin);
                planes[(b, i, j)] = 1;
            }
        }
    }
    MaskStack::from_planes(planes, seed)
}

/// One compressed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: Array2<f64>,
    pub b: usize,
    pub sigma: f64,
    pub frame_offset: usize,
}

/// Measurement divided per pixel by the mask column sum. For noise-free
/// sensing of frames in `[0,1]` every pixel lies in `[0,1]`; static scenes
/// are recovered exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMeasurement {
    pub ybar: Array2<f64>,
    pub b: usize,
}

/// Modulate-and-sum sensing: `y = sum_b C_b .* X_b + z`.
/// With `sigma == 0` the sum is exact and `rng` is untouched.
pub fn sense<R: Rng>(
    cube: &VideoCube,
    masks: &MaskStack,
    b: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Measurement> {
    sense_at(cube, masks, b, sigma, 0, rng)
}

/// `sense` with a recorded source-frame offset for logging.
pub fn sense_at<R: Rng>(
    cube: &VideoCube,
    masks: &MaskStack,
    b: usize,
    sigma: f64,
    frame_offset: usize,
    rng: &mut R,
) -> Result<Measurement> {
    if b == 0 || b > masks.bmax() {
        return Err(Error::validation(format!("compression ratio {b} outside mask range 1..={}", masks.bmax())));
    }
    if cube.frame_count() != b {
        return Err(Error::validation(format!(
            "cube has {} frames, expected {b}",
            cube.frame_count()
        )));
    }
    if cube.height() != masks.height() || cube.width() != masks.width() {
        return Err(Error::validation(format!(
            "cube is {}x{} but masks are {}x{}",
            cube.height(),
            cube.width(),
            masks.height(),
            masks.width()
        )));
    }
    if sigma < 0.0 {
        return Err(Error::validation("sigma must be non-negative"));
    }

    let (h, w) = (cube.height(), cube.width());
    let mut y = Array2::zeros((h, w));
    for k in 0..b {
        let frame = cube.frame(k);
        let plane = masks.plane(k);
        for ((yv, &x), &m) in y.iter_mut().zip(frame.iter()).zip(plane.iter()) {
            *yv += m as f64 * x;
        }
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma validated");
        for yv in y.iter_mut() {
            *yv += normal.sample(rng);
        }
    }
    Ok(Measurement { y, b, sigma, frame_offset })
}

/// Divides per pixel by the mask column sum over the used prefix.
pub fn normalize(m: &Measurement, masks: &MaskStack) -> Result<NormalizedMeasurement> {
    let sums = masks.column_sums(m.b)?;
    if sums.dim() != m.y.dim() {
        return Err(Error::validation("measurement and mask dimensions differ"));
    }
    if sums.iter().any(|&s| s == 0.0) {
        return Err(Error::validation(
            "mask column sum is zero at some pixel; mask prefix invariant violated",
        ));
    }
    Ok(NormalizedMeasurement { ybar: &m.y / &sums, b: m.b })
}

/// The pipeline's sensing path. Noise is injected on the normalized
/// measurement (the `[0,1]` scale on which the noise levels are specified)
/// and propagated back to the raw measurement so that reconstruction sees a
/// consistent `y`. With `sigma == 0` this is exactly `sense` + `normalize`.
pub fn sense_normalized<R: Rng>(
    cube: &VideoCube,
    masks: &MaskStack,
    b: usize,
    sigma: f64,
    frame_offset: usize,
    rng: &mut R,
) -> Result<(Measurement, NormalizedMeasurement)> {
    let clean = sense_at(cube, masks, b, 0.0, frame_offset, rng)?;
    let mut norm = normalize(&clean, masks)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma validated");
        for v in norm.ybar.iter_mut() {
            *v += normal.sample(rng);
        }
        let sums = masks.column_sums(b)?;
        let y = &norm.ybar * &sums;
        return Ok((Measurement { y, b, sigma, frame_offset }, norm));
    }
    Ok((clean, norm))
}

/// The structured linear map `H = [D_1, ..., D_B]`, stored by its
/// diagonals (the flattened mask planes).
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOperator {
    diags: Array2<f64>, // (b, n)
    height: usize,
    width: usize,
}

impl SensingOperator {
    pub fn b(&self) -> usize {
        self.diags.dim().0
    }

    /// Pixels per frame, N = Nx * Ny.
    pub fn n(&self) -> usize {
        self.diags.dim().1
    }

    /// `y = H x` for `x` of length `N * B` in frame-major order.
    pub fn apply(&self, x: &[f64]) -> Result<Array1<f64>> {
        let (b, n) = self.diags.dim();
        if x.len() != n * b {
            return Err(Error::validation(format!("input length {} != N*B = {}", x.len(), n * b)));
        }
        let mut y = Array1::zeros(n);
        for k in 0..b {
            let block = &x[k * n..(k + 1) * n];
            let diag = self.diags.row(k);
            for i in 0..n {
                y[i] += diag[i] * block[i];
            }
        }
        Ok(y)
    }

    /// `x = H^T y`, length `N * B`.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (b, n) = self.diags.dim();
        if y.len() != n {
            return Err(Error::validation(format!("input length {} != N = {n}", y.len())));
        }
        let mut x = vec![0.0; n * b];
        for k in 0..b {
            let diag = self.diags.row(k);
            let block = &mut x[k * n..(k + 1) * n];
            for i in 0..n {
                block[i] = diag[i] * y[i];
            }
        }
        Ok(x)
    }

    /// Diagonal of `H H^T`: the per-pixel mask column sums.
    pub fn hht_diagonal(&self) -> Array1<f64> {
        let (b, n) = self.diags.dim();
        let mut d = Array1::zeros(n);
        for k in 0..b {
            let diag = self.diags.row(k);
            for i in 0..n {
                // Entries are 0/1 so the square is the value itself.
                d[i] += diag[i] * diag[i];
            }
        }
        d
    }
}

/// Materializes the operator for the length-B prefix of a mask stack.
pub fn build_operator(masks: &MaskStack, b: usize) -> Result<SensingOperator> {
    if b == 0 || b > masks.bmax() {
        return Err(Error::validation(format!("prefix length {b} outside 1..={}", masks.bmax())));
    }
    let (h, w) = (masks.height(), masks.width());
    let n = h * w;
    let mut diags = Array2::zeros((b, n));
    for k in 0..b {
        for (i, &m) in masks.plane(k).iter().enumerate() {
            diags[(k, i)] = m as f64;
        }
    }
    Ok(SensingOperator { diags, height: h, width: w })
}

/// `y = H x` on flattened input; identical to `sense` with sigma = 0.
pub fn sense_vectorized(h: &SensingOperator, x_flat: &[f64]) -> Result<Array1<f64>> {
    h.apply(x_flat)
}

impl SensingOperator {
    /// Reshape an operator-domain measurement vector back to an image.
    pub fn unflatten_measurement(&self, y: &Array1<f64>) -> Array2<f64> {
        Array2::from_shape_vec((self.height, self.width), y.to_vec()).expect("length checked")
    }
}

// ---------------------------------------------------------------------------
// Persistence: "SCIM" container, bit-packed planes, rows padded to bytes.
// ---------------------------------------------------------------------------

const MASK_MAGIC: &[u8; 4] = b"SCIM";

/// Header: magic, nx, ny, bmax (LE u32), seed (LE u64); then planes in
/// b-major order, each row packed MSB-first and padded to a byte boundary.
pub fn save_masks(masks: &MaskStack, path: &Path) -> Result<()> {
    let (bmax, h, w) = masks.planes.dim();
    let row_bytes = w.div_ceil(8);
    let mut out = Vec::with_capacity(24 + bmax * h * row_bytes);
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(bmax as u32).to_le_bytes());
    out.extend_from_slice(&masks.seed.to_le_bytes());
    for b in 0..bmax {
        for i in 0..h {
            let mut byte = 0u8;
            for j in 0..w {
                if masks.planes[(b, i, j)] == 1 {
                    byte |= 0x80 >> (j % 8);
                }
                if j % 8 == 7 {
                    out.push(byte);
                    byte = 0;
                }
            }
            if w % 8 != 0 {
                out.push(byte);
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io_path(path, e))
}

pub fn load_masks(path: &Path) -> Result<MaskStack> {
    let bytes = fs::read(path).map_err(|e| Error::io_path(path, e))?;
    if bytes.len() < 24 || &bytes[0..4] != MASK_MAGIC {
        return Err(Error::io(format!("{}: not a mask container (bad magic)", path.display())));
    }
    let rd_u32 = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let h = rd_u32(4);
    let w = rd_u32(8);
    let bmax = rd_u32(12);
    let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if h == 0 || w == 0 || bmax == 0 {
        return Err(Error::io(format!("{}: zero mask dimensions in header", path.display())));
    }
    let row_bytes = w.div_ceil(8);
    let expected = 24 + bmax * h * row_bytes;
    if bytes.len() != expected {
        return Err(Error::io(format!(
            "{}: container holds {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut planes = Array3::zeros((bmax, h, w));
    let mut pos = 24usize;
    for b in 0..bmax {
        for i in 0..h {
            for j in 0..w {
                let byte = bytes[pos + j / 8];
                planes[(b, i, j)] = (byte >> (7 - j % 8)) & 1;
            }
            pos += row_bytes;
        }
    }
    MaskStack::from_planes(planes, seed)
}
