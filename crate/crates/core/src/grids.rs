//! Dense 2D scalar and vector grids.
//!
//! Pixel `(x, y)` has its center at the continuous point `(x, y)`: x grows to
//! the right, y grows downwards, and the top-left pixel center is the origin.
//! Sampling between centers is bilinear; queries outside the lattice of
//! centers clamp to the edge.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;
use crate::skeleton::Skeleton;

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidGrid(format!("empty grid {width}x{height}")));
    }
    Ok(())
}

/// Bilinear stencil: the four corner indices along each axis and the weights
/// of the far corner.
#[derive(Debug, Clone, Copy)]
struct Stencil<T> {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    fx: T,
    fy: T,
}

impl<T: Real> Stencil<T> {
    fn new(width: usize, height: usize, p: Point2<T>) -> Self {
        let (x0, x1, fx) = axis(p.x, width);
        let (y0, y1, fy) = axis(p.y, height);
        Stencil { x0, x1, y0, y1, fx, fy }
    }

    fn blend(&self, v00: T, v10: T, v01: T, v11: T) -> T {
        let one = T::one();
        let top = v00 * (one - self.fx) + v10 * self.fx;
        let bottom = v01 * (one - self.fx) + v11 * self.fx;
        top * (one - self.fy) + bottom * self.fy
    }
}

fn axis<T: Real>(coord: T, len: usize) -> (usize, usize, T) {
    let max = T::lit((len - 1) as f64);
    // NaN falls through to the lower edge.
    let c = if coord > T::zero() { coord.min(max) } else { T::zero() };
    let i0 = c.floor().to_usize().unwrap_or(0).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    let f = if i1 == i0 { T::zero() } else { c - T::lit(i0 as f64) };
    (i0, i1, f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> ScalarGrid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidGrid(format!("{} values for a {width}x{height} grid", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite value".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self { width, height, data: vec![value; width * height] })
    }

    /// Evaluates `f` at every pixel center.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_shape<U: Real>(&self, other: &ScalarGrid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Bilinear sample at a continuous point, clamped to the lattice.
    pub fn sample(&self, p: Point2<T>) -> T {
        let s = Stencil::new(self.width, self.height, p);
        s.blend(self.get(s.x0, s.y0), self.get(s.x1, s.y0), self.get(s.x0, s.y1), self.get(s.x1, s.y1))
    }
}

/// Two-channel grid; each pixel stores a `(u, v)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> VectorGrid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != 2 * width * height {
            return Err(Error::InvalidGrid(format!("{} values for a {width}x{height} vector grid", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite value".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, Point2::default())
    }

    pub fn filled(width: usize, height: usize, value: Point2<T>) -> Result<Self> {
        check_dims(width, height)?;
        let data = std::iter::repeat_n([value.x, value.y], width * height).flatten().collect();
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Point2<T>) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(2 * width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(v.x);
                data.push(v.y);
            }
        }
        Self::new(width, height, data)
    }

    /// Builds a vector grid from separate u and v planes.
    pub fn from_planes(u: &ScalarGrid<T>, v: &ScalarGrid<T>) -> Result<Self> {
        if !u.same_shape(v) {
            return Err(Error::DimensionMismatch("u/v planes differ in shape".into()));
        }
        let data = u.data().iter().zip(v.data()).flat_map(|(&a, &b)| [a, b]).collect();
        Self::new(u.width, u.height, data)
    }

    /// Splits into u and v planes.
    pub fn planes(&self) -> (ScalarGrid<T>, ScalarGrid<T>) {
        let u = self.data.iter().step_by(2).copied().collect();
        let v = self.data.iter().skip(1).step_by(2).copied().collect();
        (
            ScalarGrid { width: self.width, height: self.height, data: u },
            ScalarGrid { width: self.width, height: self.height, data: v },
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved `u, v` values in row-major pixel order.
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Point2<T> {
        let i = 2 * (y * self.width + x);
        Point2::new(self.data[i], self.data[i + 1])
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn sample(&self, p: Point2<T>) -> Point2<T> {
        let s = Stencil::new(self.width, self.height, p);
        let (a, b, c, d) = (self.get(s.x0, s.y0), self.get(s.x1, s.y0), self.get(s.x0, s.y1), self.get(s.x1, s.y1));
        Point2::new(s.blend(a.x, b.x, c.x, d.x), s.blend(a.y, b.y, c.y, d.y))
    }
}

/// Confidence maps, affinity fields and the annotation mask of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet<T> {
    pub skeleton: Skeleton,
    pub confidences: Vec<ScalarGrid<T>>,
    pub affinities: Vec<VectorGrid<T>>,
    pub mask: ScalarGrid<T>,
}

impl<T: Real> FieldSet<T> {
    pub fn new(
        skeleton: Skeleton,
        confidences: Vec<ScalarGrid<T>>,
        affinities: Vec<VectorGrid<T>>,
        mask: ScalarGrid<T>,
    ) -> Result<Self> {
        if confidences.len() != skeleton.num_joints() {
            return Err(Error::SkeletonMismatch(format!(
                "{} confidence maps for {} joints",
                confidences.len(),
                skeleton.num_joints()
            )));
        }
        if affinities.len() != skeleton.num_limbs() {
            return Err(Error::SkeletonMismatch(format!(
                "{} affinity fields for {} limbs",
                affinities.len(),
                skeleton.num_limbs()
            )));
        }
        let (w, h) = (mask.width(), mask.height());
        let shapes_agree = confidences.iter().all(|g| g.width() == w && g.height() == h)
            && affinities.iter().all(|g| g.width() == w && g.height() == h);
        if !shapes_agree {
            return Err(Error::DimensionMismatch("field grids differ in shape".into()));
        }
        if mask.data().iter().any(|&m| m != T::zero() && m != T::one()) {
            return Err(Error::InvalidGrid("mask is not binary".into()));
        }
        Ok(Self { skeleton, confidences, affinities, mask })
    }

    /// An all-zero field set.
    pub fn empty(skeleton: Skeleton, width: usize, height: usize) -> Result<Self> {
        let confidences =
            (0..skeleton.num_joints()).map(|_| ScalarGrid::zeros(width, height)).collect::<Result<_>>()?;
        let affinities = (0..skeleton.num_limbs()).map(|_| VectorGrid::zeros(width, height)).collect::<Result<_>>()?;
        Self::new(skeleton, confidences, affinities, ScalarGrid::zeros(width, height)?)
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn lattice_identity() {
        let g = ScalarGrid::from_fn(6, 6, |x, y| if (x, y) == (3, 4) { 5.0 } else { 0.0 }).unwrap();
        assert_eq!(g.sample(p(3.0, 4.0)), 5.0);
    }

    #[test]
    fn constant_grid_any_point() {
        let g = ScalarGrid::filled(4, 3, 2.5f64).unwrap();
        for q in [p(0.0, 0.0), p(1.3, 2.9), p(-5.0, 7.0), p(100.0, -1.0)] {
            assert_eq!(g.sample(q), 2.5);
        }
        let v = VectorGrid::filled(4, 3, p(1.0, 0.0)).unwrap();
        assert_eq!(v.sample(p(2.2, 1.7)), p(1.0, 0.0));
    }

    #[test]
    fn two_pixel_interpolation() {
        let g = ScalarGrid::new(2, 1, vec![0.0f64, 1.0]).unwrap();
        assert_eq!(g.sample(p(0.25, 0.0)), 0.25);
    }

    #[test]
    fn clamps_outside_lattice() {
        let g = ScalarGrid::new(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.sample(p(-3.0, -3.0)), 1.0);
        assert_eq!(g.sample(p(9.0, 9.0)), 4.0);
        assert_eq!(g.sample(p(9.0, -1.0)), 2.0);
        assert_eq!(g.sample(p(0.5, 9.0)), 3.5);
        assert_eq!(g.sample(p(f64::NAN, 0.0)), 1.0);
    }

    #[test]
    fn vector_lattice_and_midpoint() {
        let v = VectorGrid::new(2, 1, vec![0.0f64, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(v.sample(p(1.0, 0.0)), p(1.0, 1.0));
        assert_eq!(v.sample(p(0.5, 0.0)), p(0.5, 0.5));
        let (u, w) = v.planes();
        assert_eq!(VectorGrid::from_planes(&u, &w).unwrap(), v);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ScalarGrid::<f32>::new(0, 3, vec![]).is_err());
        assert!(ScalarGrid::new(2, 2, vec![1.0f32; 3]).is_err());
        assert!(ScalarGrid::new(1, 1, vec![f32::NAN]).is_err());
        assert!(VectorGrid::new(2, 2, vec![0.0f32; 4]).is_err());
    }

    #[test]
    fn fieldset_checks_counts() {
        let s = Skeleton::preset("mpii16").unwrap();
        let fs = FieldSet::<f32>::empty(s.clone(), 5, 4).unwrap();
        assert_eq!((fs.confidences.len(), fs.affinities.len()), (16, 15));
        let mut short = fs.confidences.clone();
        short.pop();
        assert!(matches!(
            FieldSet::new(s, short, fs.affinities.clone(), fs.mask.clone()),
            Err(Error::SkeletonMismatch(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn linear_between_adjacent_centers(
            vals in proptest::collection::vec(-10.0f64..10.0, 12),
            x in 0usize..3, y in 0usize..3, t in 0.0f64..1.0,
        ) {
            let g = ScalarGrid::new(4, 3, vals).unwrap();
            let (xf, yf) = (x as f64, y as f64);
            let along_x = g.get(x, y) * (1.0 - t) + g.get(x + 1, y) * t;
            proptest::prop_assert!((g.sample(p(xf + t, yf)) - along_x).abs() < 1e-12);
            if y + 1 < 3 {
                let along_y = g.get(x, y) * (1.0 - t) + g.get(x, y + 1) * t;
                proptest::prop_assert!((g.sample(p(xf, yf + t)) - along_y).abs() < 1e-12);
            }
            proptest::prop_assert_eq!(g.sample(p(xf, yf)), g.get(x, y));
        }
    }
}
