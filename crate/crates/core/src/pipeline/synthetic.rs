//! Deterministic synthetic test images.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Encoded sRGB in `[0, 1]` from hue (degrees), saturation and value.
pub fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// A background plus soft round blobs, colors drawn from `palette`.
pub fn blob_image<F>(width: u32, height: u32, seed: u64, blobs: usize, mut palette: F) -> RgbImage
where
    F: FnMut(&mut ChaCha8Rng) -> [f64; 3],
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = palette(&mut rng);
    let scale = width.max(height) as f64;
    let spots: Vec<([f64; 2], f64, [f64; 3])> = (0..blobs)
        .map(|_| {
            let c = [rng.random::<f64>() * width as f64, rng.random::<f64>() * height as f64];
            let r = scale * rng.random_range(0.05..0.3);
            (c, r, palette(&mut rng))
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        let mut col = bg;
        for (c, r, color) in &spots {
            let d2 = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2);
            let w = (-d2 / (2.0 * r * r)).exp();
            for k in 0..3 {
                col[k] = col[k] * (1.0 - w) + color[k] * w;
            }
        }
        Rgb(col.map(to_u8))
    })
}

/// Independent uniform codes per pixel and channel.
pub fn noise_image(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(width, height, |_, _| Rgb([rng.random(), rng.random(), rng.random()]))
}

/// Bright, mostly blue and cyan content.
pub fn blue_bright_image(width: u32, height: u32, seed: u64) -> RgbImage {
    blob_image(width, height, seed, 10, |rng| {
        hsv(rng.random_range(180.0..250.0), rng.random_range(0.3..0.8), rng.random_range(0.75..1.0))
    })
}

/// Dark, strongly saturated reds.
pub fn red_dark_image(width: u32, height: u32, seed: u64) -> RgbImage {
    blob_image(width, height, seed, 10, |rng| {
        hsv(rng.random_range(-12.0..12.0), rng.random_range(0.85..1.0), rng.random_range(0.15..0.4))
    })
}

/// Names of the fixed test images produced by [`test_image`].
pub const TEST_IMAGES: [&str; 6] = ["gradient", "color_bars", "foliage", "sky", "skin", "night"];

pub fn test_image(name: &str, width: u32, height: u32) -> Option<RgbImage> {
    let img = match name {
        "gradient" => RgbImage::from_fn(width, height, |x, y| {
            let u = x as f64 / (width.max(2) - 1) as f64;
            let v = y as f64 / (height.max(2) - 1) as f64;
            Rgb([to_u8(u), to_u8(v), to_u8(1.0 - 0.5 * (u + v))])
        }),
        "color_bars" => RgbImage::from_fn(width, height, |x, _| {
            let bar = (x as usize * 7 / width.max(1) as usize).min(6);
            let c = [
                [0.75, 0.75, 0.75],
                [0.75, 0.75, 0.0],
                [0.0, 0.75, 0.75],
                [0.0, 0.75, 0.0],
                [0.75, 0.0, 0.75],
                [0.75, 0.0, 0.0],
                [0.0, 0.0, 0.75],
            ][bar];
            Rgb(c.map(to_u8))
        }),
        "foliage" => blob_image(width, height, 101, 14, |rng| {
            hsv(rng.random_range(70.0..150.0), rng.random_range(0.4..0.9), rng.random_range(0.2..0.8))
        }),
        "sky" => blob_image(width, height, 102, 8, |rng| {
            hsv(rng.random_range(195.0..225.0), rng.random_range(0.1..0.6), rng.random_range(0.6..1.0))
        }),
        "skin" => blob_image(width, height, 103, 8, |rng| {
            hsv(rng.random_range(10.0..35.0), rng.random_range(0.25..0.6), rng.random_range(0.4..0.95))
        }),
        "night" => blob_image(width, height, 104, 12, |rng| {
            hsv(rng.random_range(0.0..360.0), rng.random_range(0.2..1.0), rng.random_range(0.02..0.25))
        }),
        _ => return None,
    };
    Some(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv(0.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
        assert_eq!(hsv(120.0, 1.0, 1.0), [0.0, 1.0, 0.0]);
        assert_eq!(hsv(240.0, 1.0, 0.5), [0.0, 0.0, 0.5]);
        assert_eq!(hsv(77.0, 0.0, 0.3), [0.3, 0.3, 0.3]);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(blue_bright_image(32, 20, 3), blue_bright_image(32, 20, 3));
        assert_ne!(red_dark_image(32, 20, 3), red_dark_image(32, 20, 4));
        for name in TEST_IMAGES {
            let img = test_image(name, 40, 30).unwrap();
            assert_eq!((img.width(), img.height()), (40, 30));
        }
        assert!(test_image("nope", 4, 4).is_none());
    }
}
