use crate::image::{Drawing, Image};

pub const DEFAULT_CANNY_SIGMA: f64 = 1.0;

/// Separable Gaussian blur with clamped borders. `sigma <= 0` copies.
pub fn gaussian_blur(img: &Image<f64>, sigma: f64) -> Image<f64> {
    if sigma <= 0.0 {
        return img.clone();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    let (w, h) = img.dims();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let tmp = Image::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(j, kv)| kv * img.get(clamp(x as i64 + j as i64 - r, w), y))
            .sum::<f64>()
    });
    Image::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(j, kv)| kv * tmp.get(x, clamp(y as i64 + j as i64 - r, h)))
            .sum::<f64>()
    })
}

/// Canny edges with the default blur.
pub fn canny_lines(img: &Image<f64>, low: f64, high: f64) -> Drawing {
    canny_with_sigma(img, DEFAULT_CANNY_SIGMA, low, high)
}

/// Gaussian blur, Sobel gradients, non-maximum suppression and hysteresis.
/// Thresholds apply to the Sobel gradient magnitude; the output is binary.
pub fn canny_with_sigma(img: &Image<f64>, sigma: f64, low: f64, high: f64) -> Drawing {
    let (w, h) = img.dims();
    let mut out = Drawing::new(w, h);
    if w == 0 || h == 0 {
        return out;
    }
    let b = gaussian_blur(img, sigma);
    let at = |x: i64, y: i64| *b.get(x.clamp(0, w as i64 - 1) as usize, y.clamp(0, h as i64 - 1) as usize);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let sx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let sy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = sx.hypot(sy);
        }
    }

    let m = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    // 0: horizontal gradient, 1: 45°, 2: vertical, 3: 135° (y down).
    let mut thin = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let g = mag[i];
            if g <= 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            let (dx, dy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            // Strict on one side so plateaus keep exactly one pixel.
            if g > m(x - dx, y - dy) && g >= m(x + dx, y + dy) {
                thin[i] = g;
            }
        }
    }

    let mut stack: Vec<usize> = Vec::new();
    let data = out.as_mut_slice();
    for i in 0..w * h {
        if thin[i] > 0.0 && thin[i] >= high {
            data[i] = 1.0;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if data[j] == 0.0 && thin[j] > 0.0 && thin[j] >= low {
                    data[j] = 1.0;
                    stack.push(j);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_edges() {
        let img = Image::filled(20, 20, 0.7);
        assert_eq!(canny_lines(&img, 0.0, 0.0).max_value(), 0.0);
    }

    #[test]
    fn vertical_step_gives_one_column() {
        let img = Image::from_fn(32, 24, |x, _| if x < 16 { 0.0 } else { 1.0 });
        let e = canny_lines(&img, 0.1, 0.3);
        let cols: Vec<usize> = (0..32).filter(|&x| (0..24).any(|y| *e.get(x, y) > 0.0)).collect();
        assert_eq!(cols.len(), 1);
        assert!((cols[0] as f64 - 15.5).abs() <= 1.0);
        assert!((0..24).all(|y| *e.get(cols[0], y) == 1.0));
    }

    #[test]
    fn infinite_thresholds_suppress_everything() {
        let img = Image::from_fn(16, 16, |x, y| ((x * 7 + y * 3) % 5) as f64 / 4.0);
        assert_eq!(canny_lines(&img, f64::INFINITY, f64::INFINITY).max_value(), 0.0);
    }

    #[test]
    fn blur_preserves_constants() {
        let img = Image::filled(9, 7, 0.25);
        let b = gaussian_blur(&img, 2.0);
        assert!(b.as_slice().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }
}
