//! Seeded geometric augmentation: rotation, shift, scale and horizontal flip
//! about the image center, bilinear resampling, black border fill.

use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::raster::RawImage;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub max_rotation_deg: f64,
    pub max_shift_frac: f64,
    pub max_scale_delta: f64,
    pub hflip_prob: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            max_rotation_deg: 10.0,
            max_shift_frac: 0.1,
            max_scale_delta: 0.1,
            hflip_prob: 0.5,
        }
    }
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams {
        max_rotation_deg: 0.0,
        max_shift_frac: 0.0,
        max_scale_delta: 0.0,
        hflip_prob: 0.0,
    };

    pub fn validate(&self) -> Result<(), DataError> {
        let ok = self.max_rotation_deg >= 0.0
            && self.max_rotation_deg.is_finite()
            && (0.0..1.0).contains(&self.max_shift_frac)
            && (0.0..1.0).contains(&self.max_scale_delta)
            && (0.0..=1.0).contains(&self.hflip_prob);
        if ok {
            Ok(())
        } else {
            Err(DataError::Invalid(format!(
                "augmentation parameters out of range: {self:?}"
            )))
        }
    }
}

/// One concrete draw of the augmentation transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation_deg: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub scale: f64,
    pub hflip: bool,
}

impl Transform {
    /// Draws rotation, x shift, y shift, scale and flip, in that order.
    pub fn draw(params: &AugmentParams, width: usize, height: usize, rng: &mut SeededRng) -> Self {
        let r = params.max_rotation_deg;
        let s = params.max_shift_frac;
        let d = params.max_scale_delta;
        Transform {
            rotation_deg: rng.uniform(-r, r),
            shift_x: rng.uniform(-s, s) * width as f64,
            shift_y: rng.uniform(-s, s) * height as f64,
            scale: rng.uniform(1.0 - d, 1.0 + d),
            hflip: rng.bernoulli(params.hflip_prob),
        }
    }

    /// Resamples `image` under this transform. Output pixel `p` (after the
    /// optional mirror) reads input `c + R(-θ)(p - t - c) / s`, where `c` is
    /// the image center.
    pub fn apply(&self, image: &RawImage) -> RawImage {
        let (w, h, ch) = (image.width(), image.height(), image.channels());
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let theta = self.rotation_deg.to_radians();
        let (sin, cos) = theta.sin_cos();
        let mut data = Vec::with_capacity(w * h * ch);
        for y in 0..h {
            for x in 0..w {
                let ox = if self.hflip { (w - 1 - x) as f64 } else { x as f64 };
                let dx = ox - self.shift_x - cx;
                let dy = y as f64 - self.shift_y - cy;
                let sx = cx + (cos * dx + sin * dy) / self.scale;
                let sy = cy + (-sin * dx + cos * dy) / self.scale;
                for c in 0..ch {
                    let v = image.sample(sx, sy, c, Some(0.0));
                    data.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        RawImage::new(w, h, ch, data).expect("shape preserved")
    }
}

/// Draws a transform from `rng` and applies it.
pub fn augment(image: &RawImage, params: &AugmentParams, rng: &mut SeededRng) -> RawImage {
    Transform::draw(params, image.width(), image.height(), rng).apply(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn asymmetric() -> RawImage {
        RawImage::new(5, 4, 3, (0..60).map(|v| (v * 4) as u8).collect()).unwrap()
    }

    #[test]
    fn identity_params_copy_pixels() {
        let img = asymmetric();
        let mut rng = SeededRng::new(1);
        assert_eq!(augment(&img, &AugmentParams::IDENTITY, &mut rng), img);
    }

    #[test]
    fn forced_flip_mirrors() {
        let img = asymmetric();
        let params = AugmentParams {
            hflip_prob: 1.0,
            ..AugmentParams::IDENTITY
        };
        let mut rng = SeededRng::new(5);
        let out = augment(&img, &params, &mut rng);
        for y in 0..4 {
            for x in 0..5 {
                for c in 0..3 {
                    assert_eq!(out.pixel(x, y, c), img.pixel(4 - x, y, c));
                }
            }
        }
        let twice = augment(&out, &params, &mut rng);
        assert_eq!(twice, img);
    }

    #[test]
    fn seeded_draws_reproduce() {
        let img = asymmetric();
        let params = AugmentParams::default();
        let a = augment(&img, &params, &mut SeededRng::new(77));
        let b = augment(&img, &params, &mut SeededRng::new(77));
        assert_eq!(a, b);
    }

    #[test]
    fn quarter_turn_rotates_square() {
        let img = RawImage::new(3, 3, 1, vec![1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        let t = Transform {
            rotation_deg: 90.0,
            shift_x: 0.0,
            shift_y: 0.0,
            scale: 1.0,
            hflip: false,
        };
        let out = t.apply(&img);
        // Output (x, y) reads input (cx + (y - cy), cy - (x - cx)).
        assert_eq!(out.data(), &[7, 4, 1, 8, 5, 2, 9, 6, 3]);
    }

    #[test]
    fn shift_fills_black() {
        let img = RawImage::filled(4, 4, 1, 200);
        let t = Transform {
            rotation_deg: 0.0,
            shift_x: 2.0,
            shift_y: 0.0,
            scale: 1.0,
            hflip: false,
        };
        let out = t.apply(&img);
        for y in 0..4 {
            assert_eq!(out.pixel(0, y, 0), 0);
            assert_eq!(out.pixel(1, y, 0), 0);
            assert_eq!(out.pixel(2, y, 0), 200);
        }
    }

    #[test]
    fn draws_stay_in_range() {
        let params = AugmentParams::default();
        let mut rng = SeededRng::new(3);
        for _ in 0..1000 {
            let t = Transform::draw(&params, 100, 50, &mut rng);
            assert!(t.rotation_deg.abs() <= 10.0);
            assert!(t.shift_x.abs() <= 10.0);
            assert!(t.shift_y.abs() <= 5.0);
            assert!((0.9..=1.1).contains(&t.scale));
        }
    }

    #[test]
    fn params_validation() {
        assert!(AugmentParams::default().validate().is_ok());
        let bad = AugmentParams {
            max_shift_frac: 1.0,
            ..AugmentParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentParams {
            hflip_prob: 1.5,
            ..AugmentParams::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn shape_preserved(w in 1usize..12, h in 1usize..12, gray in any::<bool>(), seed in any::<u64>()) {
            let ch = if gray { 1 } else { 3 };
            let img = RawImage::filled(w, h, ch, 128);
            let out = augment(&img, &AugmentParams::default(), &mut SeededRng::new(seed));
            prop_assert_eq!((out.width(), out.height(), out.channels()), (w, h, ch));
        }

        #[test]
        fn identity_for_any_image(w in 1usize..10, h in 1usize..10, seed in any::<u64>(), fill in any::<u8>()) {
            let data: Vec<u8> = (0..w * h * 3).map(|i| (i as u8).wrapping_mul(31).wrapping_add(fill)).collect();
            let img = RawImage::new(w, h, 3, data).unwrap();
            let out = augment(&img, &AugmentParams::IDENTITY, &mut SeededRng::new(seed));
            prop_assert_eq!(out, img);
        }
    }
}
