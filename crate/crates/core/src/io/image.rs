use thiserror::Error;

/// PSNR reported for identical inputs.
pub const PSNR_CAP: f64 = 99.0;

/// Linear RGB image, rows top to bottom, with optional coverage alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB.
    pub rgb: Vec<f32>,
    pub alpha: Option<Vec<f32>>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize) -> Self {
        HdrImage { width, height, rgb: vec![0.0; width * height * 3], alpha: None }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, v: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&v);
    }

    pub fn is_finite(&self) -> bool {
        self.rgb.iter().chain(self.alpha.iter().flatten()).all(|v| v.is_finite())
    }

    /// Pixels whose alpha exceeds 0.5; all pixels when there is no alpha.
    pub fn coverage_mask(&self) -> Vec<bool> {
        match &self.alpha {
            Some(a) => a.iter().map(|&v| v > 0.5).collect(),
            None => vec![true; self.width * self.height],
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("image shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("mask has {0} entries for {1} pixels")]
    MaskMismatch(usize, usize),
    #[error("mask selects no pixels")]
    EmptyMask,
}

/// `10 log10(peak^2 / MSE)` over the RGB values of masked pixels, capped at
/// [`PSNR_CAP`].
pub fn psnr(a: &HdrImage, b: &HdrImage, peak: f64, mask: Option<&[bool]>) -> Result<f64, MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::ShapeMismatch(a.width, a.height, b.width, b.height));
    }
    let n = a.width * a.height;
    if let Some(m) = mask {
        if m.len() != n {
            return Err(MetricsError::MaskMismatch(m.len(), n));
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in 0..n {
        if mask.is_some_and(|m| !m[p]) {
            continue;
        }
        for c in 0..3 {
            let d = a.rgb[p * 3 + c] as f64 - b.rgb[p * 3 + c] as f64;
            sum += d * d;
        }
        count += 3;
    }
    if count == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(psnr_from_mse(sum / count as f64, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
    }
}
