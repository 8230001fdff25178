//! Moves between planar images and NCHW tensors.

use d3net_core::Image;
use d3net_neural::{Real, Tensor};

use crate::error::{ensure, Result};

/// `[1, c, h, w]` tensor holding the image samples.
pub fn image_to_tensor<T: Real>(img: &Image) -> Tensor<T> {
    let (c, h, w) = img.shape();
    let data = img.data().iter().map(|&v| T::lit(v as f64)).collect();
    Tensor::new([1, c, h, w], data).expect("image layout is NCHW")
}

/// Stacks equally shaped images into one batch.
pub fn images_to_batch<T: Real>(imgs: &[Image]) -> Result<Tensor<T>> {
    ensure!(!imgs.is_empty(), "empty batch");
    let (c, h, w) = imgs[0].shape();
    ensure!(imgs.iter().all(|i| i.shape() == (c, h, w)), "batch images differ in shape");
    let data = imgs.iter().flat_map(|i| i.data().iter().map(|&v| T::lit(v as f64))).collect();
    Ok(Tensor::new([imgs.len(), c, h, w], data)?)
}

/// Image `n` of a batch tensor.
pub fn tensor_to_image<T: Real>(t: &Tensor<T>, n: usize) -> Result<Image> {
    let [b, c, h, w] = t.shape();
    ensure!(n < b, "batch index {n} out of range {b}");
    ensure!(c == 1 || c == 3, "tensor has {c} channels; images need 1 or 3");
    let plane = c * h * w;
    let data = t.data()[n * plane..(n + 1) * plane].iter().map(|v| v.as_f64() as f32).collect();
    Ok(Image::new(c, h, w, data)?)
}
