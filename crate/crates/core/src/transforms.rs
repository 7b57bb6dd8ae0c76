//! Illumination-robust patch encodings: photometric color ratios and
//! circular local binary patterns.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;

pub const LBP_RADIUS: f64 = 3.0;
pub const LBP_POINTS: usize = 24;
/// Relative slack under which a neighbor counts as equal to the center.
///
/// Interpolated neighbors that equal the center in exact arithmetic can land a
/// few ulps either side of it; without the slack such ties would flip under a
/// global gain and break the invariance the codes are used for.
pub const LBP_TIE_TOLERANCE: f64 = 1e-9;

/// Per-pixel angles `(c1, c2, c3)`, each in `[0, pi/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorRatioImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<[f64; 3]>,
}

impl ColorRatioImage {
    /// Maps `[0, pi/2]` linearly onto bytes for storage as an RGB image.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values
            .iter()
            .flat_map(|c| c.map(|v| (v / FRAC_PI_2 * 255.0).round().clamp(0.0, 255.0) as u8))
            .collect()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num > 0.0 {
            FRAC_PI_2
        } else {
            0.0
        }
    } else {
        (num / den).atan()
    }
}

pub fn color_ratio_pixel(r: f64, g: f64, b: f64) -> [f64; 3] {
    [ratio(r, g.max(b)), ratio(g, r.max(b)), ratio(b, r.max(g))]
}

/// Color ratios of an interleaved RGB image.
pub fn color_ratios(rgb: &[u8], width: usize, height: usize) -> ColorRatioImage {
    assert_eq!(rgb.len(), width * height * 3, "buffer does not match dimensions");
    let values = rgb
        .chunks_exact(3)
        .map(|p| color_ratio_pixel(f64::from(p[0]), f64::from(p[1]), f64::from(p[2])))
        .collect();
    ColorRatioImage { width, height, values }
}

pub fn luminance_plane(rgb: &[u8]) -> Vec<f64> {
    rgb.chunks_exact(3)
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

/// Sampling offsets of the circle, counter-clockwise from +x in image
/// coordinates (y down). Offsets within 1e-9 of a multiple of 1/2 are snapped,
/// so points that are rational in exact arithmetic (the axes, and the 30 and
/// 60 degree points at radius 3) interpolate without rounding noise.
pub fn lbp_offsets(radius: f64, points: usize) -> Vec<(f64, f64)> {
    let snap = |v: f64| {
        let h = (v * 2.0).round() / 2.0;
        if (v - h).abs() < 1e-9 {
            h
        } else {
            v
        }
    };
    (0..points)
        .map(|p| {
            let a = TAU * p as f64 / points as f64;
            (snap(radius * a.cos()), snap(-radius * a.sin()))
        })
        .collect()
}

/// 24-point, radius-3 LBP codes of a grayscale plane.
///
/// Neighbors are bilinearly interpolated from a replicate-padded copy; bit `p`
/// is set when neighbor `p` is at least the center value, up to
/// [`LBP_TIE_TOLERANCE`] times the largest magnitude involved.
pub fn lbp(gray: &[f64], width: usize, height: usize) -> Vec<u32> {
    assert_eq!(gray.len(), width * height, "buffer does not match dimensions");
    let pad = LBP_RADIUS.ceil() as usize + 1;
    let pw = width + 2 * pad;
    let ph = height + 2 * pad;
    let mut padded = vec![0.0; pw * ph];
    for j in 0..ph {
        let sj = j.saturating_sub(pad).min(height - 1);
        for i in 0..pw {
            let si = i.saturating_sub(pad).min(width - 1);
            padded[j * pw + i] = gray[sj * width + si];
        }
    }
    struct Tap {
        dx: isize,
        dy: isize,
        fx: f64,
        fy: f64,
    }
    let taps: Vec<Tap> = lbp_offsets(LBP_RADIUS, LBP_POINTS)
        .into_iter()
        .map(|(ox, oy)| {
            let (x0, y0) = (ox.floor(), oy.floor());
            Tap { dx: x0 as isize, dy: y0 as isize, fx: ox - x0, fy: oy - y0 }
        })
        .collect();

    let mut codes = vec![0u32; width * height];
    codes.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let (px, py) = ((x + pad) as isize, (y + pad) as isize);
            let center = padded[py as usize * pw + px as usize];
            let mut code = 0u32;
            for (p, t) in taps.iter().enumerate() {
                let base = ((py + t.dy) as usize) * pw + (px + t.dx) as usize;
                let (a, b) = (padded[base], padded[base + 1]);
                let (c, d) = (padded[base + pw], padded[base + pw + 1]);
                let top = a + t.fx * (b - a);
                let bottom = c + t.fx * (d - c);
                let v = top + t.fy * (bottom - top);
                let scale = center.abs().max(a.abs()).max(b.abs()).max(c.abs()).max(d.abs());
                if v >= center - LBP_TIE_TOLERANCE * scale {
                    code |= 1 << p;
                }
            }
            *out = code;
        }
    });
    codes
}

/// LBP codes of an RGB image via its luminance.
pub fn lbp_rgb(rgb: &[u8], width: usize, height: usize) -> Vec<u32> {
    lbp(&luminance_plane(rgb), width, height)
}

/// Bit count of each code scaled to a byte, for viewing.
pub fn lbp_visualization(codes: &[u32]) -> Vec<u8> {
    codes
        .iter()
        .map(|c| (f64::from(c.count_ones()) * 255.0 / LBP_POINTS as f64).round() as u8)
        .collect()
}

/// Codes packed losslessly into RGB bytes (low byte in blue).
pub fn lbp_pack_rgb(codes: &[u32]) -> Vec<u8> {
    codes
        .iter()
        .flat_map(|c| [(c >> 16) as u8, (c >> 8) as u8, *c as u8])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratio_examples() {
        let g = color_ratio_pixel(100.0, 100.0, 100.0);
        assert!(g.iter().all(|v| (v - std::f64::consts::FRAC_PI_4).abs() < 1e-15));
        assert_eq!(color_ratio_pixel(255.0, 0.0, 0.0), [FRAC_PI_2, 0.0, 0.0]);
        assert_eq!(color_ratio_pixel(0.0, 0.0, 0.0), [0.0; 3]);
    }

    #[test]
    fn constant_image_is_all_ones() {
        let codes = lbp(&vec![42.0; 100], 10, 10);
        assert!(codes.iter().all(|&c| c == (1 << 24) - 1));
    }

    #[test]
    fn offsets_are_on_circle_and_snapped() {
        let o = lbp_offsets(3.0, 24);
        assert_eq!(o[0], (3.0, 0.0));
        assert_eq!(o[6], (0.0, -3.0));
        assert_eq!(o[12], (-3.0, 0.0));
        assert_eq!(o[18], (0.0, 3.0));
        for (x, y) in o {
            assert!((x.hypot(y) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_edge() {
        // left half dark, right half bright; center pixels far from the edge see
        // a uniform neighborhood
        let (w, h) = (20, 9);
        let g: Vec<f64> = (0..w * h).map(|i| if i % w < 10 { 10.0 } else { 200.0 }).collect();
        let c = lbp(&g, w, h);
        assert_eq!(c[4 * w + 2], (1 << 24) - 1);
        assert_eq!(c[4 * w + 17], (1 << 24) - 1);
        // just left of the edge: only neighbors reaching into the bright side stay
        // set besides equal ones; the point straight right (p = 0) is bright
        let left = c[4 * w + 9];
        assert_eq!(left & 1, 1);
        // just right of the edge: the point straight left (p = 12) is dark
        let right = c[4 * w + 10];
        assert_eq!(right >> 12 & 1, 0);
    }

    proptest! {
        #[test]
        fn lbp_invariant_under_affine_maps(pix in proptest::collection::vec(0u8..=255, 12 * 12), coarse in proptest::bool::ANY, off in -50i32..50, alpha in 0.01f64..5.0) {
            // coarse images have few levels and hence many exact ties
            let g: Vec<f64> = pix.iter().map(|&v| if coarse { f64::from(v / 32 * 32) } else { f64::from(v) }).collect();
            let scaled: Vec<f64> = g.iter().map(|v| v * alpha).collect();
            let shifted: Vec<f64> = g.iter().map(|v| v + f64::from(off)).collect();
            let base = lbp(&g, 12, 12);
            prop_assert_eq!(&lbp(&scaled, 12, 12), &base);
            prop_assert_eq!(&lbp(&shifted, 12, 12), &base);
        }

        #[test]
        fn ratios_are_bounded(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            for v in color_ratio_pixel(f64::from(r), f64::from(g), f64::from(b)) {
                prop_assert!((0.0..=FRAC_PI_2).contains(&v));
            }
        }

        #[test]
        fn ratios_are_scale_invariant(r in 1u8..=255, g in 1u8..=255, b in 1u8..=255, a in 0.01f64..10.0) {
            let x = color_ratio_pixel(f64::from(r), f64::from(g), f64::from(b));
            let y = color_ratio_pixel(f64::from(r) * a, f64::from(g) * a, f64::from(b) * a);
            for (p, q) in x.iter().zip(y) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }

        #[test]
        fn codes_fit_24_bits(pix in proptest::collection::vec(0u8..=255, 7 * 5 * 3)) {
            let codes = lbp_rgb(&pix, 7, 5);
            prop_assert!(codes.iter().all(|&c| c < 1 << 24));
            let packed = lbp_pack_rgb(&codes);
            let back: Vec<u32> = packed.chunks(3).map(|p| u32::from(p[0]) << 16 | u32::from(p[1]) << 8 | u32::from(p[2])).collect();
            prop_assert_eq!(back, codes);
        }
    }
}
