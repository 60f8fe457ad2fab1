use crate::raster::{ensure_same_dims, MaskImage, RasterError, RgbImage};

/// Per-pixel OR.
pub fn mask_union(a: &MaskImage, b: &MaskImage) -> Result<MaskImage, RasterError> {
    a.zip_with(b, |x, y| x || y)
}

/// Per-pixel `a AND NOT b`.
pub fn mask_subtract(a: &MaskImage, b: &MaskImage) -> Result<MaskImage, RasterError> {
    a.zip_with(b, |x, y| x && !y)
}

/// Binary blend: `syn` where `seg` is set, `init` elsewhere.
pub fn compose(syn: &RgbImage, init: &RgbImage, seg: &MaskImage) -> Result<RgbImage, RasterError> {
    ensure_same_dims(syn.dims(), init.dims())?;
    ensure_same_dims(syn.dims(), seg.dims())?;
    let data = syn
        .as_raw()
        .chunks_exact(3)
        .zip(init.as_raw().chunks_exact(3))
        .zip(seg.as_raw())
        .flat_map(|((s, i), &m)| if m { [s[0], s[1], s[2]] } else { [i[0], i[1], i[2]] })
        .collect();
    RgbImage::from_raw(syn.width(), syn.height(), data)
}
