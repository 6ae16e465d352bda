//! Small shared helpers: seed derivation, image buffers, PNG IO, statistics.

use ndarray::{Array2, Array3};
use std::path::Path;

/// RGB image, shape (height, width, 3), values in [0, 1].
pub type Image = Array3<f32>;

/// Binary mask, shape (height, width).
pub type Mask = Array2<bool>;

/// Derives a child seed from a master seed and a stage tag.
///
/// Stable across platforms and releases; every stage of a run derives its RNG
/// from the master seed through this, so one `--seed` reproduces everything.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = splitmix64(h);
    }
    splitmix64(h)
}

/// Derives a child seed indexed by an integer (e.g. per-object, per-sample).
pub fn derive_seed_indexed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, tag) ^ splitmix64(index.wrapping_add(0xa076_1d64_78bd_642f)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// New image filled with one color.
pub fn solid_image(height: usize, width: usize, rgb: [f32; 3]) -> Image {
    let mut img = Array3::zeros((height, width, 3));
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                img[[y, x, c]] = rgb[c];
            }
        }
    }
    img
}

pub fn pixel(img: &Image, y: usize, x: usize) -> [f32; 3] {
    [img[[y, x, 0]], img[[y, x, 1]], img[[y, x, 2]]]
}

pub fn set_pixel(img: &mut Image, y: usize, x: usize, rgb: [f32; 3]) {
    for c in 0..3 {
        img[[y, x, c]] = rgb[c];
    }
}

/// Writes an image as 8-bit RGB PNG. Values are clamped to [0, 1].
pub fn save_png(img: &Image, path: &Path) -> std::io::Result<()> {
    let (h, w, _) = img.dim();
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = pixel(img, y, x);
            let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            buf.put_pixel(x as u32, y as u32, image::Rgb([to_u8(px[0]), to_u8(px[1]), to_u8(px[2])]));
        }
    }
    buf.save(path).map_err(std::io::Error::other)
}

/// Reads an 8-bit RGB PNG into a [0, 1] float image.
pub fn load_png(path: &Path) -> std::io::Result<Image> {
    let img = image::open(path).map_err(std::io::Error::other)?.to_rgb8();
    let (w, h) = img.dimensions();
    let mut out = Array3::zeros((h as usize, w as usize, 3));
    for y in 0..h {
        for x in 0..w {
            let px = img.get_pixel(x, y);
            for c in 0..3 {
                out[[y as usize, x as usize, c]] = f32::from(px[c]) / 255.0;
            }
        }
    }
    Ok(out)
}

/// Writes a binary mask as a black/white PNG.
pub fn save_mask_png(mask: &Mask, path: &Path) -> std::io::Result<()> {
    let (h, w) = mask.dim();
    let mut img = Array3::zeros((h, w, 3));
    for y in 0..h {
        for x in 0..w {
            if mask[[y, x]] {
                set_pixel(&mut img, y, x, [1.0, 1.0, 1.0]);
            }
        }
    }
    save_png(&img, path)
}

/// Reads a black/white PNG back into a mask (threshold at 0.5 luminance).
pub fn load_mask_png(path: &Path) -> std::io::Result<Mask> {
    let img = load_png(path)?;
    let (h, w, _) = img.dim();
    Ok(Array2::from_shape_fn((h, w), |(y, x)| {
        (img[[y, x, 0]] + img[[y, x, 1]] + img[[y, x, 2]]) / 3.0 > 0.5
    }))
}

/// Spearman rank correlation of two equal-length samples.
///
/// Ties get average ranks. Returns 0 when either side has zero variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(7, "noise");
        let b = derive_seed(7, "noise");
        let c = derive_seed(7, "background");
        let d = derive_seed(8, "noise");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn indexed_seeds_differ_per_index() {
        let s0 = derive_seed_indexed(3, "object", 0);
        let s1 = derive_seed_indexed(3, "object", 1);
        assert_ne!(s0, s1);
    }

    #[test]
    fn spearman_monotone_is_one() {
        let xs = [0.5, 0.7, 0.91, 0.99];
        let ys = [1.0, 2.0, 5.0, 9.0];
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
        let ys_rev: Vec<f64> = ys.iter().rev().copied().collect();
        assert!((spearman(&xs, &ys_rev) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn png_round_trip_preserves_quantized_values(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let mut img = solid_image(8, 6, [0.0, 0.5, 1.0]);
        set_pixel(&mut img, 3, 2, [1.0, 0.0, 0.25]);
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert_eq!(back.dim(), (8, 6, 3));
        for (a, b) in img.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1.0 / 255.0 + 1e-6);
        }
    }
}
