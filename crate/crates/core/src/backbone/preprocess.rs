use super::{Layout, PreprocessMode};
use crate::raster::RawImage;

const IMAGENET_MEAN_RGB: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD_RGB: [f32; 3] = [0.229, 0.224, 0.225];
const CAFFE_MEAN_BGR: [f32; 3] = [103.939, 116.779, 123.68];

/// Resizes to `size`×`size` (bilinear), replicates gray to three channels,
/// applies `mode`, and lays the result out as a single-image NCHW or NHWC
/// tensor.
pub fn to_input_tensor(image: &RawImage, size: usize, mode: PreprocessMode, layout: Layout) -> Vec<f32> {
    let resized = image.resize_bilinear(size, size);
    let ch = image.channels();
    let mut out = vec![0f32; 3 * size * size];
    for p in 0..size * size {
        let rgb = if ch == 1 {
            let v = resized[p];
            [v, v, v]
        } else {
            [resized[p * 3], resized[p * 3 + 1], resized[p * 3 + 2]]
        };
        let values = match mode {
            PreprocessMode::ScalePm1 => rgb.map(|v| v / 127.5 - 1.0),
            PreprocessMode::Scale01Center => {
                let mut o = [0f32; 3];
                for c in 0..3 {
                    o[c] = (rgb[c] / 255.0 - IMAGENET_MEAN_RGB[c]) / IMAGENET_STD_RGB[c];
                }
                o
            }
            PreprocessMode::MeanSubtract => [
                rgb[2] - CAFFE_MEAN_BGR[0],
                rgb[1] - CAFFE_MEAN_BGR[1],
                rgb[0] - CAFFE_MEAN_BGR[2],
            ],
        };
        for (c, v) in values.into_iter().enumerate() {
            let idx = match layout {
                Layout::Nchw => c * size * size + p,
                Layout::Nhwc => p * 3 + c,
            };
            out[idx] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_pm1_endpoints() {
        let img = RawImage::new(2, 1, 1, vec![0, 255]).unwrap();
        let t = to_input_tensor(&img, 2, PreprocessMode::ScalePm1, Layout::Nchw);
        // Row of 2x2 after resize: top and bottom rows identical.
        assert_eq!(&t[0..4], &[-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(&t[0..4], &t[4..8]);
    }

    #[test]
    fn mean_subtract_swaps_to_bgr() {
        let img = RawImage::new(1, 1, 3, vec![10, 20, 30]).unwrap();
        let t = to_input_tensor(&img, 1, PreprocessMode::MeanSubtract, Layout::Nhwc);
        assert_eq!(t, vec![30.0 - 103.939, 20.0 - 116.779, 10.0 - 123.68]);
    }

    #[test]
    fn layouts_hold_same_values() {
        let img = RawImage::new(2, 2, 3, (0..12).map(|v| v * 20).collect()).unwrap();
        let a = to_input_tensor(&img, 2, PreprocessMode::Scale01Center, Layout::Nchw);
        let b = to_input_tensor(&img, 2, PreprocessMode::Scale01Center, Layout::Nhwc);
        for p in 0..4 {
            for c in 0..3 {
                assert_eq!(a[c * 4 + p], b[p * 3 + c]);
            }
        }
        assert!(((a[0] * 0.229 + 0.485) * 255.0 - 0.0).abs() < 1e-4);
    }
}
