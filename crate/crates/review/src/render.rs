//! 8-bit grayscale PNG rendering of tensors for the browser.

use memaudit_core::ImageTensor;

use crate::error::ReviewError;

/// Render one plane as PNG. 2D images take no slice; 3D images default to
/// the middle slice along the first axis.
///
/// Intensities map linearly from the image's own min and max to 0..=255.
pub fn render_png(img: &ImageTensor, slice: Option<usize>) -> Result<Vec<u8>, ReviewError> {
    let k = match (img.ndim(), slice) {
        (2, Some(_)) => return Err(ReviewError::BadRequest("slice given for a 2D image".into())),
        (2, None) => 0,
        (_, Some(k)) if k >= img.depth() => {
            return Err(ReviewError::BadRequest(format!(
                "slice {k} out of range for depth {}",
                img.depth()
            )))
        }
        (_, Some(k)) => k,
        (_, None) => img.depth() / 2,
    };
    let (lo, hi) = img
        .values()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let plane = img.slice(k).expect("slice checked above");
    let pixels: Vec<u8> = plane
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect();
    let (rows, cols) = img.plane_dims();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, cols as u32, rows as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| ReviewError::Render(e.to_string()))?;
        w.write_image_data(&pixels).map_err(|e| ReviewError::Render(e.to_string()))?;
    }
    Ok(out)
}
