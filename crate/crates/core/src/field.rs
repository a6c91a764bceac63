//! Image and sensor-data containers tied to a [`Grid`].

use std::path::Path;

use ndarray::{Array3, Ix3, Zip};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::npy;
use crate::real::Real;

macro_rules! grid_field {
    ($name:ident, $shape:ident, $what:literal) => {
        #[doc = concat!("Real-valued ", $what, " sampled on a [`Grid`].")]
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<T> {
            grid: Grid,
            values: Array3<T>,
        }

        impl<T: Real> $name<T> {
            /// Wraps `values`, checking the shape against the grid and that
            /// every entry is finite.
            pub fn new(grid: Grid, values: Array3<T>) -> Result<Self> {
                let want = grid.$shape();
                if values.shape() != want {
                    return Err(Error::shape(&want, values.shape()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(concat!(
                        $what,
                        " contains non-finite values"
                    )));
                }
                Ok(Self { grid, values })
            }

            pub(crate) fn from_parts(grid: Grid, values: Array3<T>) -> Self {
                debug_assert_eq!(values.shape(), grid.$shape());
                Self { grid, values }
            }

            pub fn zeros(grid: Grid) -> Self {
                let [a, b, c] = grid.$shape();
                Self {
                    grid,
                    values: Array3::zeros((a, b, c)),
                }
            }

            pub fn from_fn(grid: Grid, f: impl FnMut((usize, usize, usize)) -> T) -> Result<Self> {
                let [a, b, c] = grid.$shape();
                Self::new(grid, Array3::from_shape_fn((a, b, c), f))
            }

            pub fn grid(&self) -> &Grid {
                &self.grid
            }

            pub fn values(&self) -> &Array3<T> {
                &self.values
            }

            pub fn into_values(self) -> Array3<T> {
                self.values
            }

            pub fn shape(&self) -> [usize; 3] {
                self.grid.$shape()
            }

            /// Same values on a grid with identical shape (e.g. another sound speed).
            pub fn with_grid(self, grid: Grid) -> Result<Self> {
                if grid.$shape() != self.grid.$shape() {
                    return Err(Error::shape(&self.grid.$shape(), &grid.$shape()));
                }
                Ok(Self {
                    grid,
                    values: self.values,
                })
            }

            pub fn map(&self, f: impl Fn(T) -> T) -> Self {
                Self::from_parts(self.grid, self.values.mapv(f))
            }

            pub fn scale(&self, a: T) -> Self {
                self.map(|v| v * a)
            }

            /// `a * self + b * other`.
            pub fn lincomb(&self, a: T, other: &Self, b: T) -> Result<Self> {
                self.check_same(other)?;
                let values = Zip::from(&self.values)
                    .and(&other.values)
                    .map_collect(|&x, &y| a * x + b * y);
                Ok(Self::from_parts(self.grid, values))
            }

            pub fn sub(&self, other: &Self) -> Result<Self> {
                self.lincomb(T::one(), other, -T::one())
            }

            pub fn dot(&self, other: &Self) -> Result<T> {
                self.check_same(other)?;
                Ok(Zip::from(&self.values)
                    .and(&other.values)
                    .fold(T::zero(), |acc, &x, &y| acc + x * y))
            }

            pub fn norm(&self) -> T {
                self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
            }

            pub fn max(&self) -> T {
                self.values.iter().copied().fold(T::neg_infinity(), T::max)
            }

            pub fn min(&self) -> T {
                self.values.iter().copied().fold(T::infinity(), T::min)
            }

            pub fn check_same(&self, other: &Self) -> Result<()> {
                if self.values.shape() != other.values.shape() {
                    return Err(Error::shape(self.values.shape(), other.values.shape()));
                }
                Ok(())
            }

            pub fn write_npy(&self, path: &Path) -> Result<()> {
                npy::write(path, &self.values)
            }

            /// Reads values from `path`, checking them against `grid`.
            pub fn read_npy(path: &Path, grid: Grid) -> Result<Self> {
                let arr = npy::read::<T>(path)?;
                let want = grid.$shape();
                let actual = arr.shape().to_vec();
                let arr = arr
                    .into_dimensionality::<Ix3>()
                    .map_err(|_| Error::shape(&want, &actual))?;
                if arr.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(path.to_path_buf()));
                }
                Self::new(grid, arr)
            }
        }
    };
}

grid_field!(PressureImage, image_shape, "initial pressure image");
grid_field!(SensorData, data_shape, "detector time series");

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::square_2d(4, 6, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_wrong_shape_and_nan() {
        let g = grid();
        assert!(matches!(
            PressureImage::<f64>::new(g, Array3::zeros((4, 1, 5))),
            Err(Error::ShapeMismatch { .. })
        ));
        let mut v = Array3::<f64>::zeros((4, 1, 4));
        v[[1, 0, 2]] = f64::NAN;
        assert!(PressureImage::new(g, v).is_err());
        assert!(SensorData::<f64>::new(g, Array3::zeros((4, 1, 6))).is_ok());
    }

    #[test]
    fn lincomb_and_dot() {
        let g = grid();
        let a = PressureImage::from_fn(g, |(i, _, k)| (i + k) as f64).unwrap();
        let b = PressureImage::from_fn(g, |(i, _, _)| i as f64).unwrap();
        let c = a.lincomb(2.0, &b, -1.0).unwrap();
        assert_eq!(c.values()[[3, 0, 1]], 2.0 * 4.0 - 3.0);
        assert_eq!(a.sub(&a).unwrap().norm(), 0.0);
        let d = a.dot(&b).unwrap();
        let brute: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
        assert_eq!(d, brute);
    }
}
