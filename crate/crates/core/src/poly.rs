//! Exact-structure bivariate polynomials of total degree at most [`MAX_DEGREE`].
//!
//! Coefficients are stored sparsely, keyed by the exponent pair `(i, j)` of
//! the monomial `x^i y^j`. Only coefficients that are exactly `0.0` are
//! dropped, so cancellation identities such as `div(curl w) = 0` come out as
//! an empty coefficient map rather than a small residual.

use alloc::collections::BTreeMap;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Largest total degree a [`Poly2`] may carry.
pub const MAX_DEGREE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("polynomial product of degree {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeOverflow(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A real polynomial in two variables.
#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly2 {
    coeffs: BTreeMap<(u8, u8), f64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    /// `c * x^i * y^j`.
    ///
    /// # Panics
    /// If `i + j` exceeds [`MAX_DEGREE`].
    pub fn monomial(i: u8, j: u8, c: f64) -> Self {
        assert!(i + j <= MAX_DEGREE, "monomial degree {} too large", i + j);
        let mut coeffs = BTreeMap::new();
        if c != 0.0 {
            coeffs.insert((i, j), c);
        }
        Self { coeffs }
    }

    /// The affine polynomial `c0 + cx * x + cy * y`.
    pub fn affine(c0: f64, cx: f64, cy: f64) -> Self {
        Self::from_terms([((0, 0), c0), ((1, 0), cx), ((0, 1), cy)])
    }

    /// Builds a polynomial from `((i, j), c)` terms, summing repeated keys.
    pub fn from_terms<I: IntoIterator<Item = ((u8, u8), f64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for ((i, j), c) in terms {
            assert!(i + j <= MAX_DEGREE, "monomial degree {} too large", i + j);
            p.add_term((i, j), c);
        }
        p
    }

    fn add_term(&mut self, key: (u8, u8), c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.coeffs.entry(key).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.coeffs.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Total degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|&(i, j)| u32::from(i) + u32::from(j)).max()
    }

    pub fn coeff(&self, i: u8, j: u8) -> f64 {
        self.coeffs.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u8, u8), f64)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (&k, &v) in &self.coeffs {
            out.add_term(k, v * c);
        }
        out
    }

    /// Product, failing if the result would exceed [`MAX_DEGREE`].
    pub fn checked_mul(&self, other: &Self) -> Result<Self, PolyError> {
        if let (Some(a), Some(b)) = (self.degree(), other.degree()) {
            if a + b > u32::from(MAX_DEGREE) {
                return Err(PolyError::DegreeOverflow(a + b));
            }
        }
        let mut out = Self::zero();
        for (&(i1, j1), &c1) in &self.coeffs {
            for (&(i2, j2), &c2) in &other.coeffs {
                out.add_term((i1 + i2, j1 + j2), c1 * c2);
            }
        }
        Ok(out)
    }

    /// `p^k`; `p^0 = 1`.
    pub fn checked_pow(&self, k: u32) -> Result<Self, PolyError> {
        let mut out = Self::constant(1.0);
        for _ in 0..k {
            out = out.checked_mul(self)?;
        }
        Ok(out)
    }

    pub fn diff(&self, axis: Axis) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.coeffs {
            match axis {
                Axis::X if i > 0 => out.add_term((i - 1, j), c * f64::from(i)),
                Axis::Y if j > 0 => out.add_term((i, j - 1), c * f64::from(j)),
                _ => {}
            }
        }
        out
    }

    pub fn grad(&self) -> VecPoly2 {
        VecPoly2::new(self.diff(Axis::X), self.diff(Axis::Y))
    }

    /// `[[p_xx, p_xy], [p_yx, p_yy]]`.
    pub fn hessian(&self) -> [[Poly2; 2]; 2] {
        let px = self.diff(Axis::X);
        let py = self.diff(Axis::Y);
        let pxy = px.diff(Axis::Y);
        [[px.diff(Axis::X), pxy.clone()], [pxy, py.diff(Axis::Y)]]
    }

    /// `curl p = (dp/dy, -dp/dx)`.
    pub fn curl(&self) -> VecPoly2 {
        VecPoly2::new(self.diff(Axis::Y), -self.diff(Axis::X))
    }

    /// Evaluates by Horner's scheme in `y` for each power of `x`, then in `x`.
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let mut rows = [0.0f64; MAX_DEGREE as usize + 1];
        // keys are ordered by (i, j): walk each i-row from the highest j down.
        let mut current: Option<u8> = None;
        let mut acc = 0.0;
        let mut last_j = 0u8;
        for (&(i, j), &c) in self.coeffs.iter().rev() {
            if current != Some(i) {
                if let Some(ci) = current {
                    rows[ci as usize] = acc * pow_u(p[1], last_j);
                }
                current = Some(i);
                acc = c;
            } else {
                acc = acc * pow_u(p[1], last_j - j) + c;
            }
            last_j = j;
        }
        if let Some(ci) = current {
            rows[ci as usize] = acc * pow_u(p[1], last_j);
        }
        let mut value = 0.0;
        for r in rows.iter().rev() {
            value = value * p[0] + r;
        }
        value
    }

    /// Substitutes `(x, y) <- m * (x, y) + c`, i.e. returns `p(m x + c)`.
    pub fn compose_affine(&self, m: [[f64; 2]; 2], c: [f64; 2]) -> Self {
        let sx = Self::affine(c[0], m[0][0], m[0][1]);
        let sy = Self::affine(c[1], m[1][0], m[1][1]);
        let deg = self.degree().unwrap_or(0) as usize;
        let mut px = alloc::vec::Vec::with_capacity(deg + 1);
        let mut py = alloc::vec::Vec::with_capacity(deg + 1);
        px.push(Self::constant(1.0));
        py.push(Self::constant(1.0));
        for k in 1..=deg {
            px.push(&px[k - 1] * &sx);
            py.push(&py[k - 1] * &sy);
        }
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.coeffs {
            let term = &px[i as usize] * &py[j as usize];
            out += &term.scale(c);
        }
        out
    }
}

fn pow_u(base: f64, e: u8) -> f64 {
    let mut r = 1.0;
    for _ in 0..e {
        r *= base;
    }
    r
}

impl fmt::Debug for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        for (n, (&(i, j), &c)) in self.coeffs.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}")?;
            match i {
                0 => {}
                1 => f.write_str("x")?,
                _ => write!(f, "x^{i}")?,
            }
            match j {
                0 => {}
                1 => f.write_str("y")?,
                _ => write!(f, "y^{j}")?,
            }
        }
        Ok(())
    }
}

impl AddAssign<&Poly2> for Poly2 {
    fn add_assign(&mut self, rhs: &Poly2) {
        for (&k, &c) in &rhs.coeffs {
            self.add_term(k, c);
        }
    }
}

impl SubAssign<&Poly2> for Poly2 {
    fn sub_assign(&mut self, rhs: &Poly2) {
        for (&k, &c) in &rhs.coeffs {
            self.add_term(k, -c);
        }
    }
}

impl Add<&Poly2> for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Poly2 {
    type Output = Poly2;
    fn add(mut self, rhs: Poly2) -> Poly2 {
        self += &rhs;
        self
    }
}

impl Sub<&Poly2> for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for Poly2 {
    type Output = Poly2;
    fn sub(mut self, rhs: Poly2) -> Poly2 {
        self -= &rhs;
        self
    }
}

impl Neg for Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

/// Polynomial product.
///
/// # Panics
/// On degree overflow; use [`Poly2::checked_mul`] where the degree is not
/// known to be in range.
impl Mul<&Poly2> for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        match self.checked_mul(rhs) {
            Ok(p) => p,
            Err(e) => panic!("{e}"),
        }
    }
}

impl Mul for Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: Poly2) -> Poly2 {
        &self * &rhs
    }
}

impl Mul<f64> for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: f64) -> Poly2 {
        self.scale(rhs)
    }
}

impl Mul<f64> for Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: f64) -> Poly2 {
        self.scale(rhs)
    }
}

/// A 2-vector of polynomials.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VecPoly2 {
    pub x_comp: Poly2,
    pub y_comp: Poly2,
}

impl VecPoly2 {
    pub fn new(x_comp: Poly2, y_comp: Poly2) -> Self {
        Self { x_comp, y_comp }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.x_comp.is_zero() && self.y_comp.is_zero()
    }

    pub fn div(&self) -> Poly2 {
        self.x_comp.diff(Axis::X) + self.y_comp.diff(Axis::Y)
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        [self.x_comp.eval(p), self.y_comp.eval(p)]
    }

    /// `v . c` for a constant vector `c`.
    pub fn dot_const(&self, c: [f64; 2]) -> Poly2 {
        self.x_comp.scale(c[0]) + self.y_comp.scale(c[1])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.x_comp.scale(c), self.y_comp.scale(c))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.x_comp.max_abs_coeff().max(self.y_comp.max_abs_coeff())
    }
}

impl AddAssign<&VecPoly2> for VecPoly2 {
    fn add_assign(&mut self, rhs: &VecPoly2) {
        self.x_comp += &rhs.x_comp;
        self.y_comp += &rhs.y_comp;
    }
}

impl Add<&VecPoly2> for &VecPoly2 {
    type Output = VecPoly2;
    fn add(self, rhs: &VecPoly2) -> VecPoly2 {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&VecPoly2> for &VecPoly2 {
    type Output = VecPoly2;
    fn sub(self, rhs: &VecPoly2) -> VecPoly2 {
        VecPoly2::new(&self.x_comp - &rhs.x_comp, &self.y_comp - &rhs.y_comp)
    }
}

/// Adds `c * p` into `acc`.
pub(crate) fn axpy(acc: &mut Poly2, c: f64, p: &Poly2) {
    if c == 0.0 {
        return;
    }
    for (&k, &v) in &p.coeffs {
        acc.add_term(k, c * v);
    }
}
