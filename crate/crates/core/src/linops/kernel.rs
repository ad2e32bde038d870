use crate::error::{Error, Result};
use crate::scalar::Real;

/// 2-D blur kernel with odd side lengths, anchored at its center tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> Kernel<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height.is_multiple_of(2) || width.is_multiple_of(2) {
            return Err(Error::validation(format!(
                "kernel sides must be odd, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidShape(format!(
                "kernel {height}x{width} given {} taps",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel"));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Single unit tap: the identity blur.
    pub fn delta(size: usize) -> Result<Self> {
        let mut data = vec![T::zero(); size * size];
        data[size * size / 2] = T::one();
        Self::new(size, size, data)
    }

    /// Gaussian with standard deviation `std` clipped to `size x size`,
    /// renormalized to unit sum after clipping.
    pub fn gaussian(size: usize, std: f64) -> Result<Self> {
        if std <= 0.0 || !std.is_finite() {
            return Err(Error::validation("gaussian std must be positive"));
        }
        let c = (size / 2) as f64;
        let taps: Vec<f64> = (0..size * size)
            .map(|i| {
                let (r, q) = ((i / size) as f64 - c, (i % size) as f64 - c);
                (-(r * r + q * q) / (2.0 * std * std)).exp()
            })
            .collect();
        Self::from_unnormalized(size, size, taps)
    }

    /// Separable bicubic (a = -0.5) anti-aliasing kernel for downscaling by
    /// `scale`: the cubic is stretched by `scale`, giving `4 * scale - 1`
    /// nonzero taps per side.
    pub fn bicubic(scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::validation("scale must be positive"));
        }
        let size = 4 * scale - 1;
        let c = (2 * scale - 1) as f64;
        let taps1: Vec<f64> = (0..size)
            .map(|i| cubic((i as f64 - c) / scale as f64))
            .collect();
        let taps = (0..size * size)
            .map(|i| taps1[i / size] * taps1[i % size])
            .collect();
        Self::from_unnormalized(size, size, taps)
    }

    fn from_unnormalized(height: usize, width: usize, taps: Vec<f64>) -> Result<Self> {
        let sum: f64 = taps.iter().sum();
        Self::new(
            height,
            width,
            taps.into_iter().map(|v| T::lit(v / sum)).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Embeds the kernel in an `h x w` grid with the center tap at `(0, 0)`,
    /// wrapping negative offsets.
    pub(crate) fn to_grid(&self, h: usize, w: usize) -> Result<Vec<T>> {
        if self.height > h || self.width > w {
            return Err(Error::validation(format!(
                "kernel {}x{} larger than grid {h}x{w}",
                self.height, self.width
            )));
        }
        let (ch, cw) = (self.height / 2, self.width / 2);
        let mut grid = vec![T::zero(); h * w];
        for r in 0..self.height {
            for c in 0..self.width {
                let gr = (r + h - ch) % h;
                let gc = (c + w - cw) % w;
                grid[gr * w + gc] = grid[gr * w + gc] + self.get(r, c);
            }
        }
        Ok(grid)
    }
}

fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (A + 2.0) * x.powi(3) - (A + 3.0) * x.powi(2) + 1.0
    } else if x < 2.0 {
        A * x.powi(3) - 5.0 * A * x.powi(2) + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}
