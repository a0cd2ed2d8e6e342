use image::GrayImage;

/// 256-bin histogram equalization.
///
/// Maps level `v` to `round(255 · (cdf(v) − cdf_min) / (N − cdf_min))` where
/// `cdf_min` is the cumulative count of the darkest occupied level. Constant
/// images are returned unchanged.
pub fn equalize(img: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for p in img.as_raw() {
        hist[*p as usize] += 1;
    }
    let n: u64 = hist.iter().sum();
    let cdf_min = hist.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if n == cdf_min {
        return img.clone();
    }
    let denom = (n - cdf_min) as f64;
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for (level, count) in hist.iter().enumerate() {
        cdf += count;
        let v = 255.0 * cdf.saturating_sub(cdf_min) as f64 / denom;
        lut[level] = v.round() as u8;
    }
    let mut out = img.clone();
    for p in out.iter_mut() {
        *p = lut[*p as usize];
    }
    out
}
